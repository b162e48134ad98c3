//! Exact discrete optimal transport for small instances.
//!
//! Equal-size uniform instances are solved by branch-and-bound over
//! permutations, visited in lexicographic order so that the returned optimum
//! is the lexicographically smallest among cost-equal ones. General weights
//! can be solved with successive shortest paths on the transportation
//! network when explicitly enabled.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::transport::{cost_matrix, TransportPlan};

pub const MAX_PERMUTATION_SIZE: usize = 12;
pub const MAX_GENERAL_SIZE: usize = 64;
const UNIFORM_TOL: f64 = 1e-12;
const MASS_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactSolver {
    /// Only the permutation brute force.
    Permutation,
    /// Fall back to min-cost flow for non-uniform or unequal instances.
    WithGeneralFallback,
}

/// Exact plan for uniform, equal-size instances with at most 12 points.
pub fn exact_ot_small(source: &DiscreteMeasure, target: &DiscreteMeasure) -> Result<TransportPlan> {
    exact_ot_small_with(source, target, ExactSolver::Permutation)
}

pub fn exact_ot_small_with(
    source: &DiscreteMeasure,
    target: &DiscreteMeasure,
    solver: ExactSolver,
) -> Result<TransportPlan> {
    let cost = cost_matrix(source, target)?;
    let (m, n) = cost.dim();
    let uniform = |w: &[f64]| {
        let u = 1.0 / w.len() as f64;
        w.iter().all(|x| (x - u).abs() <= UNIFORM_TOL)
    };
    let coupling = if m == n
        && m <= MAX_PERMUTATION_SIZE
        && uniform(source.weights())
        && uniform(target.weights())
    {
        let perm = best_permutation(&cost);
        let mut p = Array2::zeros((m, n));
        for (i, &j) in perm.iter().enumerate() {
            p[[i, j]] = 1.0 / m as f64;
        }
        p
    } else {
        match solver {
            ExactSolver::WithGeneralFallback if m <= MAX_GENERAL_SIZE && n <= MAX_GENERAL_SIZE => {
                min_cost_flow(&cost, source.weights(), target.weights())?
            }
            ExactSolver::WithGeneralFallback => {
                return Err(Error::usage(format!(
                    "exact solver handles at most {MAX_GENERAL_SIZE} points per side, got {m} x {n}"
                )))
            }
            ExactSolver::Permutation => {
                return Err(Error::usage(format!(
                    "permutation solver needs equal uniform measures of size <= {MAX_PERMUTATION_SIZE}, got {m} x {n}"
                )))
            }
        }
    };
    TransportPlan::new(source.clone(), target.clone(), coupling)
}

/// Cost-minimizing assignment, lowest lexicographic among ties.
pub(crate) fn best_permutation(cost: &Array2<f64>) -> Vec<usize> {
    let n = cost.nrows();
    // suffix_bound[i] = sum of row minima for rows i.. (a valid lower bound).
    let mut suffix_bound = vec![0.0; n + 1];
    for i in (0..n).rev() {
        let row_min = cost.row(i).iter().copied().fold(f64::INFINITY, f64::min);
        suffix_bound[i] = suffix_bound[i + 1] + row_min;
    }
    let mut search = Search {
        cost,
        suffix_bound,
        used: vec![false; n],
        current: Vec::with_capacity(n),
        best: (0..n).collect(),
        best_cost: f64::INFINITY,
    };
    search.descend(0, 0.0);
    search.best
}

struct Search<'a> {
    cost: &'a Array2<f64>,
    suffix_bound: Vec<f64>,
    used: Vec<bool>,
    current: Vec<usize>,
    best: Vec<usize>,
    best_cost: f64,
}

impl Search<'_> {
    fn improves(&self, value: f64) -> bool {
        !self.best_cost.is_finite() || value < self.best_cost - 1e-12 * (1.0 + self.best_cost.abs())
    }

    fn descend(&mut self, row: usize, partial: f64) {
        let n = self.cost.nrows();
        if row == n {
            if self.improves(partial) {
                self.best_cost = partial;
                self.best = self.current.clone();
            }
            return;
        }
        if !self.improves(partial + self.suffix_bound[row]) {
            return;
        }
        for col in 0..n {
            if self.used[col] {
                continue;
            }
            self.used[col] = true;
            self.current.push(col);
            self.descend(row + 1, partial + self.cost[[row, col]]);
            self.current.pop();
            self.used[col] = false;
        }
    }
}

/// Successive shortest paths with Bellman-Ford on the residual graph.
fn min_cost_flow(cost: &Array2<f64>, supply: &[f64], demand: &[f64]) -> Result<Array2<f64>> {
    let (m, n) = cost.dim();
    let mut flow: Array2<f64> = Array2::zeros((m, n));
    let mut supply_left = supply.to_vec();
    let mut demand_left = demand.to_vec();
    // Nodes 0..m are rows, m..m+n columns.
    let max_rounds = 4 * (m + n) * (m + n) + 16;
    for _ in 0..max_rounds {
        if supply_left.iter().all(|&s| s <= MASS_TOL) || demand_left.iter().all(|&d| d <= MASS_TOL)
        {
            return Ok(flow);
        }
        let mut dist = vec![f64::INFINITY; m + n];
        let mut pred = vec![usize::MAX; m + n];
        for i in 0..m {
            if supply_left[i] > MASS_TOL {
                dist[i] = 0.0;
            }
        }
        for _ in 0..(m + n) {
            let mut changed = false;
            for i in 0..m {
                if dist[i].is_finite() {
                    for j in 0..n {
                        let nd = dist[i] + cost[[i, j]];
                        if nd < dist[m + j] - 1e-15 {
                            dist[m + j] = nd;
                            pred[m + j] = i;
                            changed = true;
                        }
                    }
                }
            }
            for j in 0..n {
                if dist[m + j].is_finite() {
                    for i in 0..m {
                        if flow[[i, j]] > MASS_TOL {
                            let nd = dist[m + j] - cost[[i, j]];
                            if nd < dist[i] - 1e-15 {
                                dist[i] = nd;
                                pred[i] = m + j;
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let sink = (0..n)
            .filter(|&j| demand_left[j] > MASS_TOL && dist[m + j].is_finite())
            .min_by(|&x, &y| dist[m + x].total_cmp(&dist[m + y]))
            .ok_or_else(|| Error::numerical("transportation network has no augmenting path"))?;
        // Walk back to the source row, collecting the bottleneck.
        let mut path = Vec::new();
        let mut node = m + sink;
        loop {
            let p = pred[node];
            path.push((p, node));
            node = p;
            if node < m && pred[node] == usize::MAX {
                break;
            }
            if path.len() > 2 * (m + n) {
                return Err(Error::numerical("negative cycle in transportation network"));
            }
        }
        let start = node;
        let mut delta = supply_left[start].min(demand_left[sink]);
        for &(from, to) in &path {
            if from >= m {
                // Backward arc column -> row cancels flow on (row, column).
                delta = delta.min(flow[[to, from - m]]);
            }
        }
        for &(from, to) in &path {
            if from < m {
                flow[[from, to - m]] += delta;
            } else {
                flow[[to, from - m]] -= delta;
                if flow[[to, from - m]] < MASS_TOL {
                    flow[[to, from - m]] = 0.0;
                }
            }
        }
        supply_left[start] -= delta;
        demand_left[sink] -= delta;
    }
    Err(Error::numerical("min-cost flow did not terminate"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rotate_about_pole, SpherePoint};
    use crate::transport::cost;

    #[test]
    fn single_point() {
        let x = SpherePoint::from_polar(0.3, 0.1);
        let y = SpherePoint::from_polar(1.2, 2.0);
        let plan = exact_ot_small(
            &DiscreteMeasure::uniform(vec![x.clone()]).unwrap(),
            &DiscreteMeasure::uniform(vec![y.clone()]).unwrap(),
        )
        .unwrap();
        assert_eq!(plan.coupling()[[0, 0]], 1.0);
        assert!((plan.cost() - cost(&x, &y).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn rotated_pair_is_matched_by_rotation() {
        let xs = vec![
            SpherePoint::from_polar(0.4, 0.0),
            SpherePoint::from_polar(0.5, 2.5),
        ];
        let ys: Vec<_> = xs.iter().map(|x| rotate_about_pole(x, 0.3)).collect();
        let plan = exact_ot_small(
            &DiscreteMeasure::uniform(xs).unwrap(),
            &DiscreteMeasure::uniform(ys).unwrap(),
        )
        .unwrap();
        assert_eq!(plan.coupling()[[0, 0]], 0.5);
        assert_eq!(plan.coupling()[[1, 1]], 0.5);
    }

    #[test]
    fn ties_resolve_to_lowest_permutation() {
        let c = Array2::from_elem((3, 3), 1.0);
        assert_eq!(best_permutation(&c), vec![0, 1, 2]);
    }

    #[test]
    fn size_limits() {
        let pts: Vec<_> = (0..13)
            .map(|k| SpherePoint::from_polar(0.1 * k as f64, k as f64))
            .collect();
        let mu = DiscreteMeasure::uniform(pts).unwrap();
        assert!(matches!(exact_ot_small(&mu, &mu), Err(Error::Usage(_))));
        let pts: Vec<_> = (0..65)
            .map(|k| SpherePoint::from_polar(0.02 * k as f64, k as f64))
            .collect();
        let big = DiscreteMeasure::uniform(pts).unwrap();
        assert!(matches!(
            exact_ot_small_with(&big, &big, ExactSolver::WithGeneralFallback),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn flow_matches_permutation_on_uniform() {
        let xs: Vec<_> = (0..6)
            .map(|k| SpherePoint::from_polar(0.2 * k as f64 + 0.1, 1.3 * k as f64))
            .collect();
        let ys: Vec<_> = (0..6)
            .map(|k| SpherePoint::from_polar(1.4 - 0.2 * k as f64, 0.7 * k as f64))
            .collect();
        let c = cost_matrix(
            &DiscreteMeasure::uniform(xs.clone()).unwrap(),
            &DiscreteMeasure::uniform(ys.clone()).unwrap(),
        )
        .unwrap();
        let flow = min_cost_flow(&c, &[1.0 / 6.0; 6], &[1.0 / 6.0; 6]).unwrap();
        let perm = best_permutation(&c);
        let perm_cost: f64 = perm
            .iter()
            .enumerate()
            .map(|(i, &j)| c[[i, j]])
            .sum::<f64>()
            / 6.0;
        assert!(((&flow * &c).sum() - perm_cost).abs() < 1e-12);
    }

    #[test]
    fn flow_handles_unequal_weights() {
        let xs = vec![
            SpherePoint::from_polar(0.1, 0.0),
            SpherePoint::from_polar(1.0, 1.0),
        ];
        let ys = vec![
            SpherePoint::from_polar(0.2, 0.0),
            SpherePoint::from_polar(0.9, 1.1),
            SpherePoint::from_polar(1.5, 3.0),
        ];
        let src = DiscreteMeasure::new(xs, vec![0.3, 0.7]).unwrap();
        let tgt = DiscreteMeasure::new(ys, vec![0.2, 0.5, 0.3]).unwrap();
        let plan = exact_ot_small_with(&src, &tgt, ExactSolver::WithGeneralFallback).unwrap();
        assert!(plan.marginal_violation() < 1e-12);
        assert!(matches!(exact_ot_small(&src, &tgt), Err(Error::Usage(_))));
    }
}
