use std::f64::consts::FRAC_PI_2;

use halfsphere_ot::experiments::*;
use halfsphere_ot::geometry::sample_uniform_halfsphere;
use halfsphere_ot::measures::{DiscreteMeasure, RadialDensitySpec, RadialFamily};
use halfsphere_ot::transport::{cost, exact_ot_small, sinkhorn_with, RadialMap, SinkhornOptions};

fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in all_permutations(n - 1) {
        for k in 0..n {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn exact_solver_matches_brute_force_and_sinkhorn() {
    for (size, seed) in [(3, 1), (3, 2), (5, 3), (5, 4), (6, 5)] {
        let xs = sample_uniform_halfsphere(2, size, seed).unwrap();
        let ys = sample_uniform_halfsphere(2, size, seed + 100).unwrap();
        let brute = all_permutations(size)
            .iter()
            .map(|p| {
                p.iter()
                    .enumerate()
                    .map(|(i, &j)| cost(&xs[i], &ys[j]).unwrap())
                    .sum::<f64>()
                    / size as f64
            })
            .fold(f64::INFINITY, f64::min);
        let src = DiscreteMeasure::uniform(xs).unwrap();
        let tgt = DiscreteMeasure::uniform(ys).unwrap();
        let exact = exact_ot_small(&src, &tgt).unwrap().cost();
        assert!((exact - brute).abs() < 1e-14);
        let opts = SinkhornOptions {
            tol: 1e-9,
            max_iter: 100_000,
            ..SinkhornOptions::annealed(1e-4)
        };
        let out = sinkhorn_with(&src, &tgt, &opts).unwrap();
        assert!(
            (out.plan.cost() - exact).abs() < 1e-3,
            "size {size}: {} vs {exact}",
            out.plan.cost()
        );
    }
}

#[test]
fn uniform_concentration_is_one_minus_sine() {
    let out = run_concentration_audit(&RadialDensitySpec::uniform(2).unwrap(), None, 4096).unwrap();
    assert!(out.passed());
    assert_eq!(out.records.records.len(), 1000);
    for rec in &out.records.records {
        assert!((rec.lhs - (1.0 - rec.r.sin())).abs() < 1e-7);
        assert!(1.0 - rec.r.sin() <= 2.0 * (-rec.r * rec.r / 2.0).exp());
        assert!((rec.rhs - 2.0 * (-rec.r * rec.r / 2.0).exp()).abs() < 1e-8);
    }
}

#[test]
fn cap_targets_pass_concentration_audit() {
    for rho in [0.4, 0.8, 1.2, FRAC_PI_2] {
        for base in [
            RadialFamily::Uniform,
            RadialFamily::GaussianLike { beta: 1.0 },
        ] {
            let spec = RadialDensitySpec::cap(2, rho, base).unwrap();
            let out = run_concentration_audit(&spec, None, 2048).unwrap();
            assert!(out.passed(), "rho {rho}: {:?}", out.assertions);
        }
    }
}

#[test]
fn concentration_rejects_radii_past_limit() {
    let spec = RadialDensitySpec::uniform(2).unwrap();
    let out = run_concentration_audit(&spec, Some(&[0.5, 1.0, 2.0, 10.0]), 1024).unwrap();
    assert_eq!(out.records.records.len(), 2);
    assert_eq!(out.records.rejected, vec![2.0, 10.0]);
}

#[test]
fn sphere_monte_carlo_below_bound() {
    let grid: Vec<f64> = (1..=30).map(|k| 0.05 * k as f64).collect();
    for n in [2, 3, 6] {
        let out = run_sphere_concentration_check(n, 100_000, 9, &grid).unwrap();
        assert!(out.passed());
        if n == 2 {
            for r in &out.records {
                assert!((r.empirical - r.exact).abs() < 0.01);
            }
        }
    }
}

#[test]
fn rigidity_search_finds_only_rigid_maps() {
    let out = run_rigidity_search(500, 256, 1e-12, 7).unwrap();
    assert!(out.passed(), "{:?}", out.assertions);
    let s = &out.records;
    assert_eq!(s.identity + s.reflection + s.rejected, 500);
    assert!(s.max_deviation <= 2.0 * s.grid_spacing);
}

#[test]
fn explicit_rigid_maps() {
    let id = RadialMap::identity(1, 512).unwrap();
    assert_eq!(
        run_rigidity_1d(&id, 1e-12).unwrap().classification,
        Classification::Identity
    );
    let refl = RadialMap::from_fn(1, 512, |t| FRAC_PI_2 - t).unwrap();
    assert_eq!(
        run_rigidity_1d(&refl, 1e-12).unwrap().classification,
        Classification::Reflection
    );
    let half = RadialMap::from_fn(1, 512, |t| t / 2.0).unwrap();
    assert_eq!(
        run_rigidity_1d(&half, 1e-12).unwrap().classification,
        Classification::Rejected
    );
}

#[test]
fn metric_equivalence_and_half_angle_values() {
    let out = run_metric_equivalence(10_000, 3).unwrap();
    assert!(out.passed(), "{:?}", out.assertions);
    let h = &out.records.half_angle;
    assert!((h.image_chord - 2f64.sqrt()).abs() < 1e-12);
    assert!((h.input_chord - 2.0).abs() < 1e-12);
    assert!((h.euclidean_endpoint_ratio - 2f64.sqrt() / 2.0).abs() < 1e-12);
}

#[test]
fn cap_sweep_example_records() {
    let out = run_cap_restriction(2, 1.0, &[0.5, 1.0, 1.5, FRAC_PI_2], 2048).unwrap();
    let last = out.records.records.last().unwrap();
    let full = run_counterexample(2, 1.0, 2048)
        .unwrap()
        .records
        .lip_formula
        .unwrap();
    assert!((last.lip_formula - full).abs() < 1e-9 * full);
}

#[test]
fn crosscheck_near_identity_for_tiny_beta() {
    let settings = CrosscheckSettings {
        beta: 1e-6,
        count: 256,
        reg_final: 1e-3,
        ..CrosscheckSettings::default()
    };
    let out = run_sinkhorn_crosscheck(&settings).unwrap();
    assert!(out.records.max_deviation < 0.05, "{:?}", out.records);
}

#[test]
fn small_instance_crosscheck_passes() {
    let out = run_small_exact_crosscheck(&[3, 5], 5, 1e-4, 0).unwrap();
    assert!(out.passed(), "{:?}", out.assertions);
    assert_eq!(out.records.len(), 10);
}
