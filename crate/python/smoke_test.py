"""Smoke test for the halfsphere_ot_py extension module.

Build first:  maturin develop -m crates/python/Cargo.toml --release
"""

import math

import halfsphere_ot_py as hs


def main():
    pole = hs.SpherePoint.north_pole(2)
    x = hs.SpherePoint.from_polar(0.5, 1.0)
    assert abs(pole.distance(x) - 0.5) < 1e-12
    assert abs(hs.geodesic_distance(x, pole) - 0.5) < 1e-12
    y = hs.exp_map(pole, [0.3, 0.0, 0.0])
    assert abs(y.colatitude - 0.3) < 1e-12

    # identity calibration: uniform to uniform
    uniform = hs.RadialProfile(hs.RadialDensitySpec.uniform(2), 1024)
    ident = hs.RadialMap.monotone(uniform, uniform)
    assert max(abs(r - t) for t, r in zip(ident.grid, ident.values)) < 1e-9
    assert abs(ident.lipschitz()["lip_formula"] - 1.0) < 1e-6

    # gaussian target is strictly expanding somewhere
    out = hs.run_counterexample(n=2, beta=1.0)
    lip = out["records"]["lip_formula"]
    assert lip > 1.0 and all(a["passed"] for a in out["assertions"])
    print(f"counterexample lip_formula = {lip:.6f}")

    gauss = hs.RadialProfile(hs.RadialDensitySpec.gaussian_like(2, 1.0))
    m = hs.RadialMap.monotone(uniform, gauss)
    p = m.apply(x)
    assert abs(p.colatitude - m(0.5)) < 1e-12
    assert 0.0 < gauss.quantile(0.5) < math.pi / 2

    blow = hs.run_blowup(epsilons=[1.0, 0.1, 0.01])
    assert [r["epsilon"] for r in blow["records"]] == [1.0, 0.1, 0.01]
    assert blow["records"][-1]["lower_bound"] > blow["records"][0]["lower_bound"]

    # discrete solvers agree on a tiny instance
    src = hs.DiscreteMeasure(hs.sample_uniform_halfsphere(2, 4, 1))
    dst = hs.DiscreteMeasure(hs.sample_uniform_halfsphere(2, 4, 2))
    exact = hs.exact_ot_small(src, dst)
    plan, psi, psi_c = hs.sinkhorn(src, dst, 1e-4, tol=1e-9, max_iter=100_000)
    assert len(psi) == len(psi_c) == 4
    assert abs(plan.cost() - exact.cost()) < 1e-3, (plan.cost(), exact.cost())
    assert plan.marginal_violation() < 1e-6
    assert len(plan.coupling) == 4

    verdict = hs.run_rigidity_1d(hs.RadialMap.identity(1, 128))
    assert verdict["classification"] == "identity"
    metric = hs.run_metric_equivalence(count=1000, seed=3)
    assert all(a["passed"] for a in metric["assertions"])

    try:
        hs.RadialDensitySpec.gaussian_like(2, -1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative beta accepted")

    print(f"smoke test passed (version {hs.__version__})")


if __name__ == "__main__":
    main()
