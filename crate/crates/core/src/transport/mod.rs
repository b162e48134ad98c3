//! Transport solvers.
//!
//! Radial targets are handled exactly in one dimension by monotone
//! rearrangement of the colatitude laws ([`radial`]). Discrete solvers
//! ([`sinkhorn`], [`exact`]) work on weighted point clouds and serve as
//! independent oracles for the radial machinery.

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{geodesic_distance, SpherePoint};
use crate::measures::DiscreteMeasure;

pub mod exact;
pub mod lipschitz;
pub mod radial;
pub mod sinkhorn;

pub use exact::{exact_ot_small, exact_ot_small_with, ExactSolver};
pub use lipschitz::{barycentric_map, empirical_lipschitz};
pub use radial::{apply_radial_map, monotone_map, radial_lipschitz, RadialMap};
pub use sinkhorn::{sinkhorn, sinkhorn_with, Annealing, SinkhornOptions, SinkhornOutput};

/// Formula-based and pairwise Lipschitz constants of a map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzReport {
    /// Closed-form constant of a radial map.
    pub lip_formula: Option<f64>,
    /// Largest observed distance ratio over input pairs.
    pub lip_empirical: Option<f64>,
    /// Input pair attaining `lip_empirical`.
    pub witness: Option<(SpherePoint, SpherePoint)>,
    pub witness_indices: Option<(usize, usize)>,
    /// Colatitude where the formula's supremum is attained.
    pub argmax_location: Option<f64>,
}

/// Transport cost `c(x, y) = d(x, y)^2 / 2`.
pub fn cost(x: &SpherePoint, y: &SpherePoint) -> Result<f64> {
    let d = geodesic_distance(x, y)?;
    Ok(0.5 * d * d)
}

pub(crate) fn cost_matrix(
    source: &DiscreteMeasure,
    target: &DiscreteMeasure,
) -> Result<Array2<f64>> {
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch(source.dim(), target.dim()));
    }
    let (m, n) = (source.len(), target.len());
    let mut c = Array2::zeros((m, n));
    for (i, x) in source.points().iter().enumerate() {
        for (j, y) in target.points().iter().enumerate() {
            let d = x.dot(y).clamp(-1.0, 1.0).acos();
            c[[i, j]] = 0.5 * d * d;
        }
    }
    Ok(c)
}

/// A coupling between two discrete measures.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    source: DiscreteMeasure,
    target: DiscreteMeasure,
    coupling: Array2<f64>,
}

impl TransportPlan {
    /// Checks the shape and nonnegativity; marginals are checked by
    /// [`TransportPlan::marginal_violation`].
    pub fn new(
        source: DiscreteMeasure,
        target: DiscreteMeasure,
        coupling: Array2<f64>,
    ) -> Result<Self> {
        if coupling.dim() != (source.len(), target.len()) {
            return Err(Error::usage(format!(
                "coupling shape {:?} does not match ({}, {})",
                coupling.dim(),
                source.len(),
                target.len()
            )));
        }
        if coupling.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::usage(
                "coupling entries must be finite and nonnegative",
            ));
        }
        Ok(TransportPlan {
            source,
            target,
            coupling,
        })
    }

    pub fn source(&self) -> &DiscreteMeasure {
        &self.source
    }

    pub fn target(&self) -> &DiscreteMeasure {
        &self.target
    }

    pub fn coupling(&self) -> &Array2<f64> {
        &self.coupling
    }

    /// Largest absolute deviation of a row or column sum from its marginal.
    pub fn marginal_violation(&self) -> f64 {
        let rows = self
            .coupling
            .rows()
            .into_iter()
            .zip(self.source.weights())
            .map(|(r, a)| (r.sum() - a).abs());
        let cols = self
            .coupling
            .columns()
            .into_iter()
            .zip(self.target.weights())
            .map(|(c, b)| (c.sum() - b).abs());
        rows.chain(cols).fold(0.0, f64::max)
    }

    /// `sum_ij P_ij d(x_i, y_j)^2 / 2`.
    pub fn cost(&self) -> f64 {
        let c = cost_matrix(&self.source, &self.target).expect("plan measures share a dimension");
        (&c * &self.coupling).sum()
    }
}

/// Dual potentials on the source and target supports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialPair {
    pub psi: Vec<f64>,
    pub psi_c: Vec<f64>,
}

impl PotentialPair {
    /// `sum_i a_i psi_i + sum_j b_j psi_c_j`, skipping zero-weight points.
    pub fn dual_value(&self, source: &DiscreteMeasure, target: &DiscreteMeasure) -> f64 {
        let a: f64 = source
            .weights()
            .iter()
            .zip(&self.psi)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, p)| w * p)
            .sum();
        let b: f64 = target
            .weights()
            .iter()
            .zip(&self.psi_c)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, p)| w * p)
            .sum();
        a + b
    }

    /// `max_ij psi_i + psi_c_j - c(x_i, y_j)` over positive-weight points.
    pub fn max_slack(&self, source: &DiscreteMeasure, target: &DiscreteMeasure) -> Result<f64> {
        let c = cost_matrix(source, target)?;
        let mut worst = f64::NEG_INFINITY;
        for (i, &a) in source.weights().iter().enumerate() {
            if a <= 0.0 {
                continue;
            }
            for (j, &b) in target.weights().iter().enumerate() {
                if b <= 0.0 {
                    continue;
                }
                worst = worst.max(self.psi[i] + self.psi_c[j] - c[[i, j]]);
            }
        }
        Ok(worst)
    }
}
