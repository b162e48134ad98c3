//! Entropic optimal transport for the cost `d^2 / 2`.
//!
//! Potentials are kept in the log domain. Between absorptions the iterations
//! run as diagonal scalings of the stabilized kernel
//! `K_ij = exp((f_i + g_j - C_ij) / reg)`; whenever a scaling leaves
//! `[1e-50, 1e50]` it is folded back into the potentials and the kernel is
//! rebuilt. Each stage starts with one exact log-sum-exp sweep, so the kernel
//! never starts out underflowed. Annealing runs a geometric schedule of
//! decreasing `reg`, warm-starting each stage from the previous potentials.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::transport::{cost_matrix, PotentialPair, TransportPlan};

const ABSORB_BOUND: f64 = 1e50;

/// Geometric schedule `start, start * factor, …` clipped at the target reg.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Annealing {
    pub start: f64,
    pub factor: f64,
    /// Marginal tolerance for the intermediate stages.
    pub stage_tol: f64,
}

impl Default for Annealing {
    fn default() -> Self {
        Annealing {
            start: 1.0,
            factor: 0.7,
            stage_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornOptions {
    /// Entropic regularization in squared radians.
    pub reg: f64,
    /// Stop when the L1 marginal violation drops below this.
    pub tol: f64,
    /// Iteration cap per stage.
    pub max_iter: usize,
    pub anneal: Option<Annealing>,
}

impl SinkhornOptions {
    pub fn new(reg: f64) -> Self {
        SinkhornOptions {
            reg,
            tol: 1e-9,
            max_iter: 10_000,
            anneal: None,
        }
    }

    pub fn annealed(reg: f64) -> Self {
        SinkhornOptions {
            anneal: Some(Annealing::default()),
            ..Self::new(reg)
        }
    }
}

#[derive(Debug, Clone)]
pub struct SinkhornOutput {
    pub plan: TransportPlan,
    /// Potentials relative to the product measure: `P_ij = a_i b_j
    /// exp((psi_i + psi_c_j - c_ij) / reg)`.
    pub potentials: PotentialPair,
    /// Iterations summed over all stages.
    pub iterations: usize,
    /// Final L1 marginal violation (rows; columns are exact).
    pub violation: f64,
    pub stages: usize,
}

/// Plain (non-annealed) log-domain Sinkhorn.
pub fn sinkhorn(
    source: &DiscreteMeasure,
    target: &DiscreteMeasure,
    reg: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(TransportPlan, PotentialPair)> {
    let out = sinkhorn_with(
        source,
        target,
        &SinkhornOptions {
            reg,
            tol,
            max_iter,
            anneal: None,
        },
    )?;
    Ok((out.plan, out.potentials))
}

pub fn sinkhorn_with(
    source: &DiscreteMeasure,
    target: &DiscreteMeasure,
    opts: &SinkhornOptions,
) -> Result<SinkhornOutput> {
    if !(opts.reg.is_finite() && opts.reg > 0.0) {
        return Err(Error::usage(format!(
            "reg must be positive, got {}",
            opts.reg
        )));
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::usage("tol must be positive and max_iter at least 1"));
    }
    let schedule = schedule(opts)?;
    let cost = cost_matrix(source, target)?;
    let mut solver = Solver::new(&cost, source.weights(), target.weights());

    let mut iterations = 0;
    let last_stage = schedule.len() - 1;
    let mut violation = f64::INFINITY;
    for (k, &reg) in schedule.iter().enumerate() {
        let tol = if k == last_stage {
            opts.tol
        } else {
            opts.anneal.map_or(opts.tol, |a| a.stage_tol.max(opts.tol))
        };
        let (iters, viol) = solver.run_stage(reg, tol, opts.max_iter)?;
        iterations += iters;
        violation = viol;
        if k == last_stage && !(viol < tol) {
            return Err(Error::NotConverged {
                iterations: iters,
                reg,
                violation: viol,
            });
        }
    }

    let reg = opts.reg;
    let (m, n) = cost.dim();
    let mut coupling = Array2::zeros((m, n));
    for i in 0..m {
        if solver.log_a[i] == f64::NEG_INFINITY {
            continue;
        }
        for j in 0..n {
            if solver.log_b[j] == f64::NEG_INFINITY {
                continue;
            }
            coupling[[i, j]] = ((solver.f[i] + solver.g[j] - cost[[i, j]]) / reg).exp();
        }
    }
    let relative = |p: &f64, lw: &f64| {
        if *lw == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            p - reg * lw
        }
    };
    let psi = solver
        .f
        .iter()
        .zip(&solver.log_a)
        .map(|(f, la)| relative(f, la))
        .collect();
    let psi_c = solver
        .g
        .iter()
        .zip(&solver.log_b)
        .map(|(g, lb)| relative(g, lb))
        .collect();
    Ok(SinkhornOutput {
        plan: TransportPlan::new(source.clone(), target.clone(), coupling)?,
        potentials: PotentialPair { psi, psi_c },
        iterations,
        violation,
        stages: schedule.len(),
    })
}

fn schedule(opts: &SinkhornOptions) -> Result<Vec<f64>> {
    let Some(anneal) = opts.anneal else {
        return Ok(vec![opts.reg]);
    };
    if !(anneal.factor > 0.0 && anneal.factor < 1.0) {
        return Err(Error::usage(format!(
            "annealing factor must lie in (0, 1), got {}",
            anneal.factor
        )));
    }
    let mut regs = Vec::new();
    let mut reg = anneal.start;
    while reg > opts.reg {
        regs.push(reg);
        reg *= anneal.factor;
    }
    regs.push(opts.reg);
    Ok(regs)
}

struct Solver<'a> {
    cost: &'a Array2<f64>,
    a: &'a [f64],
    b: &'a [f64],
    log_a: Vec<f64>,
    log_b: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    kernel: Array2<f64>,
}

fn ln_or_neg_inf(w: f64) -> f64 {
    if w > 0.0 {
        w.ln()
    } else {
        f64::NEG_INFINITY
    }
}

fn logsumexp(mut values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.by_ref().map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl<'a> Solver<'a> {
    fn new(cost: &'a Array2<f64>, a: &'a [f64], b: &'a [f64]) -> Self {
        let (m, n) = cost.dim();
        Solver {
            cost,
            a,
            b,
            log_a: a.iter().map(|&w| ln_or_neg_inf(w)).collect(),
            log_b: b.iter().map(|&w| ln_or_neg_inf(w)).collect(),
            f: vec![0.0; m],
            g: vec![0.0; n],
            kernel: Array2::zeros((m, n)),
        }
    }

    fn log_domain_sweep(&mut self, reg: f64) {
        let (m, n) = self.cost.dim();
        for i in 0..m {
            if self.log_a[i] == f64::NEG_INFINITY {
                self.f[i] = f64::NEG_INFINITY;
                continue;
            }
            let row = self.cost.row(i);
            let g = &self.g;
            let lb = &self.log_b;
            let lse = logsumexp(
                (0..n)
                    .filter(|&j| lb[j] > f64::NEG_INFINITY)
                    .map(|j| (g[j] - row[j]) / reg),
            );
            self.f[i] = reg * (self.log_a[i] - lse);
        }
        for j in 0..n {
            if self.log_b[j] == f64::NEG_INFINITY {
                self.g[j] = f64::NEG_INFINITY;
                continue;
            }
            let col = self.cost.column(j);
            let f = &self.f;
            let la = &self.log_a;
            let lse = logsumexp(
                (0..m)
                    .filter(|&i| la[i] > f64::NEG_INFINITY)
                    .map(|i| (f[i] - col[i]) / reg),
            );
            self.g[j] = reg * (self.log_b[j] - lse);
        }
    }

    fn rebuild_kernel(&mut self, reg: f64) {
        let (m, n) = self.cost.dim();
        for i in 0..m {
            for j in 0..n {
                let e = self.f[i] + self.g[j];
                self.kernel[[i, j]] = if e == f64::NEG_INFINITY {
                    0.0
                } else {
                    ((e - self.cost[[i, j]]) / reg).exp()
                };
            }
        }
    }

    fn absorb(&mut self, reg: f64, u: &mut [f64], v: &mut [f64]) {
        for (f, s) in self.f.iter_mut().zip(u.iter_mut()) {
            if *f > f64::NEG_INFINITY {
                *f += reg * s.ln();
            }
            *s = 1.0;
        }
        for (g, s) in self.g.iter_mut().zip(v.iter_mut()) {
            if *g > f64::NEG_INFINITY {
                *g += reg * s.ln();
            }
            *s = 1.0;
        }
        self.rebuild_kernel(reg);
    }

    /// Returns (iterations, final L1 row violation).
    fn run_stage(&mut self, reg: f64, tol: f64, max_iter: usize) -> Result<(usize, f64)> {
        let (m, n) = self.cost.dim();
        self.log_domain_sweep(reg);
        self.rebuild_kernel(reg);
        let mut u = vec![1.0; m];
        let mut v = vec![1.0; n];
        let mut kv = vec![0.0; m];
        let mut ktu = vec![0.0; n];
        let mut violation = f64::INFINITY;
        for it in 0..max_iter {
            for (i, row) in self.kernel.rows().into_iter().enumerate() {
                kv[i] = row.iter().zip(&v).map(|(k, s)| k * s).sum();
            }
            violation = (0..m).map(|i| (u[i] * kv[i] - self.a[i]).abs()).sum();
            if !violation.is_finite() {
                return Err(Error::numerical(format!(
                    "sinkhorn marginal became non-finite at reg {reg:e}"
                )));
            }
            if violation < tol {
                self.absorb(reg, &mut u, &mut v);
                return Ok((it, violation));
            }
            for i in 0..m {
                u[i] = if self.a[i] > 0.0 {
                    self.a[i] / kv[i]
                } else {
                    0.0
                };
            }
            ktu.iter_mut().for_each(|s| *s = 0.0);
            for (row, &ui) in self.kernel.rows().into_iter().zip(&u) {
                if ui == 0.0 {
                    continue;
                }
                for (acc, k) in ktu.iter_mut().zip(row) {
                    *acc += k * ui;
                }
            }
            for j in 0..n {
                v[j] = if self.b[j] > 0.0 {
                    self.b[j] / ktu[j]
                } else {
                    0.0
                };
            }
            let out_of_range =
                |s: &f64| *s != 0.0 && !(*s > 1.0 / ABSORB_BOUND && *s < ABSORB_BOUND);
            if u.iter().any(out_of_range) || v.iter().any(out_of_range) {
                if u.iter().chain(&v).any(|s| !s.is_finite()) {
                    // A row or column underflowed entirely; resynchronize in
                    // the log domain.
                    u.iter_mut().for_each(|s| *s = 1.0);
                    v.iter_mut().for_each(|s| *s = 1.0);
                    self.log_domain_sweep(reg);
                    self.rebuild_kernel(reg);
                } else {
                    self.absorb(reg, &mut u, &mut v);
                }
            }
        }
        self.absorb(reg, &mut u, &mut v);
        Ok((max_iter, violation))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SpherePoint;

    fn points() -> Vec<SpherePoint> {
        vec![
            SpherePoint::from_polar(0.2, 0.0),
            SpherePoint::from_polar(0.9, 2.0),
            SpherePoint::from_polar(1.4, 4.0),
        ]
    }

    #[test]
    fn self_transport_is_feasible() {
        let mu = DiscreteMeasure::uniform(points()).unwrap();
        for reg in [1.0, 0.1, 0.01] {
            // Near-diagonal kernels converge slowly, hence the loose tolerance.
            let (plan, _) = sinkhorn(&mu, &mu, reg, 1e-7, 10_000).unwrap();
            assert!(plan.marginal_violation() < 1e-7);
            assert!(plan.cost() <= reg * 3f64.ln() + 1e-12);
        }
    }

    #[test]
    fn zero_weight_row_is_empty() {
        let src = DiscreteMeasure::new(points()[..2].to_vec(), vec![1.0, 0.0]).unwrap();
        let tgt = DiscreteMeasure::uniform(points()[1..].to_vec()).unwrap();
        let (plan, pots) = sinkhorn(&src, &tgt, 0.05, 1e-10, 1000).unwrap();
        let c = plan.coupling();
        assert_eq!(c[[1, 0]], 0.0);
        assert_eq!(c[[1, 1]], 0.0);
        assert!((c[[0, 0]] - 0.5).abs() < 1e-9 && (c[[0, 1]] - 0.5).abs() < 1e-9);
        assert_eq!(pots.psi[1], f64::NEG_INFINITY);
    }

    #[test]
    fn rejects_bad_parameters() {
        let mu = DiscreteMeasure::uniform(points()).unwrap();
        assert!(matches!(
            sinkhorn(&mu, &mu, 0.0, 1e-9, 10),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            sinkhorn(&mu, &mu, 0.1, 0.0, 10),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn reports_non_convergence() {
        let src = DiscreteMeasure::uniform(points()).unwrap();
        let tgt = DiscreteMeasure::uniform(
            points()
                .iter()
                .map(|p| crate::geometry::rotate_about_pole(p, 1.0))
                .collect(),
        )
        .unwrap();
        match sinkhorn(&src, &tgt, 1e-3, 1e-14, 1) {
            Err(Error::NotConverged { violation, .. }) => assert!(violation > 0.0),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn annealing_schedule() {
        let mut opts = SinkhornOptions::annealed(0.1);
        opts.anneal = Some(Annealing {
            start: 1.0,
            factor: 0.5,
            stage_tol: 1e-3,
        });
        assert_eq!(schedule(&opts).unwrap(), vec![1.0, 0.5, 0.25, 0.125, 0.1]);
    }
}
