//! Optimal transport on the closed upper half-sphere.
//!
//! The crate computes transport maps from the uniform measure on the
//! half-sphere to rotationally invariant targets, measures their Lipschitz
//! constants, and runs the numerical experiments showing why a spherical
//! analogue of Caffarelli's contraction theorem cannot hold:
//!
//! - [`geometry`]: points, geodesics, the exponential map, symmetries, sampling.
//! - [`measures`]: radial density families, tabulated profiles, CDF/quantile,
//!   discretization to weighted point clouds.
//! - [`transport`]: monotone radial maps, Lipschitz evaluation, Sinkhorn,
//!   a small exact solver, and barycentric projection.
//! - [`experiments`]: drivers producing checkable records for each obstruction.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod geometry;
pub mod measures;
pub mod quadrature;
pub mod transport;

pub use error::{Error, Result};
pub use geometry::{Rotation, SpherePoint, TangentVector};
pub use measures::{DiscreteMeasure, Potential, RadialDensitySpec, RadialFamily, RadialProfile};
pub use transport::{LipschitzReport, PotentialPair, RadialMap, TransportPlan};
