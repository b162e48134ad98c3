//! Rotationally invariant measures on the upper half-sphere.
//!
//! A radial measure has density `f(d(x, N))` with respect to the uniform
//! measure. In polar coordinates around the pole its colatitude has density
//! proportional to `f(t) sin^{n-1}(t)` on `[0, pi/2]`, which is what a
//! [`RadialProfile`] tabulates.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SpherePoint;
use crate::quadrature::{cumulative_simpson, simpson};

pub const DEFAULT_GRID_SIZE: usize = 4096;
pub const MIN_GRID_SIZE: usize = 64;

/// Potential `V` of a tempered family `exp(-V(t) / eps)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Potential {
    /// `V(t) = t^2`
    Quadratic,
    /// `V(t) = t`
    Linear,
}

impl Potential {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            Potential::Quadratic => t * t,
            Potential::Linear => t,
        }
    }
}

/// Unnormalized radial densities `f` with respect to the uniform measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum RadialFamily {
    Uniform,
    /// `f(t) = exp(-beta t^2)`.
    GaussianLike {
        beta: f64,
    },
    /// `f(t) = exp(-V(t) / epsilon)`.
    Tempered {
        potential: Potential,
        epsilon: f64,
    },
    /// `base` restricted to the closed cap `B(N, radius)`.
    CapRestriction {
        radius: f64,
        base: Box<RadialFamily>,
    },
}

impl RadialFamily {
    pub fn validate(&self) -> Result<()> {
        match self {
            RadialFamily::Uniform => Ok(()),
            RadialFamily::GaussianLike { beta } => {
                if !(beta.is_finite() && *beta > 0.0) {
                    return Err(Error::usage(format!("beta must be positive, got {beta}")));
                }
                Ok(())
            }
            RadialFamily::Tempered { epsilon, .. } => {
                if !(epsilon.is_finite() && *epsilon > 0.0) {
                    return Err(Error::usage(format!(
                        "epsilon must be positive, got {epsilon}"
                    )));
                }
                Ok(())
            }
            RadialFamily::CapRestriction { radius, base } => {
                if !(*radius > 0.0 && *radius <= FRAC_PI_2) {
                    return Err(Error::usage(format!(
                        "cap radius must lie in (0, pi/2], got {radius}"
                    )));
                }
                base.validate()
            }
        }
    }

    /// `log f(t)` inside the support.
    pub fn log_weight(&self, t: f64) -> f64 {
        match self {
            RadialFamily::Uniform => 0.0,
            RadialFamily::GaussianLike { beta } => -beta * t * t,
            RadialFamily::Tempered { potential, epsilon } => -potential.eval(t) / epsilon,
            RadialFamily::CapRestriction { radius, base } => {
                if t > *radius {
                    f64::NEG_INFINITY
                } else {
                    base.log_weight(t)
                }
            }
        }
    }

    /// Largest colatitude in the support.
    pub fn support_end(&self) -> f64 {
        match self {
            RadialFamily::CapRestriction { radius, base } => radius.min(base.support_end()),
            _ => FRAC_PI_2,
        }
    }
}

/// A radial density family on the upper half of `S^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialDensitySpec {
    pub n: usize,
    #[serde(flatten)]
    pub family: RadialFamily,
}

impl RadialDensitySpec {
    pub fn new(n: usize, family: RadialFamily) -> Result<Self> {
        if n < 1 {
            return Err(Error::usage("sphere dimension must be at least 1"));
        }
        family.validate()?;
        Ok(RadialDensitySpec { n, family })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(n, RadialFamily::Uniform)
    }

    pub fn gaussian_like(n: usize, beta: f64) -> Result<Self> {
        Self::new(n, RadialFamily::GaussianLike { beta })
    }

    pub fn tempered(n: usize, potential: Potential, epsilon: f64) -> Result<Self> {
        Self::new(n, RadialFamily::Tempered { potential, epsilon })
    }

    pub fn cap(n: usize, radius: f64, base: RadialFamily) -> Result<Self> {
        Self::new(
            n,
            RadialFamily::CapRestriction {
                radius,
                base: Box::new(base),
            },
        )
    }

    /// Unnormalized density with respect to the uniform measure on the
    /// half-sphere.
    pub fn weight(&self, t: f64) -> f64 {
        self.family.log_weight(t).exp()
    }

    /// Unnormalized colatitude density `f(t) sin^{n-1}(t)`.
    fn radial_weight(&self, t: f64) -> f64 {
        let w = self.weight(t);
        if self.n == 1 || w == 0.0 {
            w
        } else {
            w * t.sin().powi(self.n as i32 - 1)
        }
    }
}

/// Tabulated normalized colatitude density and CDF of a radial measure.
///
/// The grid is uniform on `[0, support_end]`; for cap restrictions it stops
/// at the cap radius and the CDF is 1 beyond it.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    spec: RadialDensitySpec,
    grid: Vec<f64>,
    density: Vec<f64>,
    cdf: Vec<f64>,
    normalizer: f64,
    step: f64,
}

/// Tabulates `f(t) sin^{n-1}(t)` on `grid_size` uniform intervals and
/// normalizes it with composite Simpson.
pub fn build_profile(spec: &RadialDensitySpec, grid_size: usize) -> Result<RadialProfile> {
    spec.family.validate()?;
    if grid_size < MIN_GRID_SIZE {
        return Err(Error::usage(format!(
            "grid_size must be at least {MIN_GRID_SIZE}, got {grid_size}"
        )));
    }
    if !grid_size.is_multiple_of(2) {
        return Err(Error::usage(format!(
            "grid_size must be even for Simpson, got {grid_size}"
        )));
    }
    let end = spec.family.support_end();
    let step = end / grid_size as f64;
    let grid: Vec<f64> = (0..=grid_size)
        .map(|i| if i == grid_size { end } else { i as f64 * step })
        .collect();
    let raw: Vec<f64> = grid.iter().map(|&t| spec.radial_weight(t)).collect();
    if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::numerical(format!(
            "non-finite density at t = {}",
            grid[i]
        )));
    }
    let normalizer = simpson(&raw, step)?;
    if !(normalizer.is_finite() && normalizer > 0.0) {
        return Err(Error::numerical(format!(
            "density normalizer is {normalizer}"
        )));
    }
    let density: Vec<f64> = raw.iter().map(|v| v / normalizer).collect();
    let mut cdf = cumulative_simpson(&density, step)?;
    // Pin the endpoint and enforce monotonicity against rounding (the
    // odd-node half panels can dip by O(ulp) where the density vanishes).
    let last = cdf.len() - 1;
    cdf[last] = 1.0;
    let mut running = 0.0f64;
    for c in cdf.iter_mut() {
        running = running.max(c.clamp(0.0, 1.0));
        *c = running;
    }
    Ok(RadialProfile {
        spec: spec.clone(),
        grid,
        density,
        cdf,
        normalizer,
        step,
    })
}

impl RadialProfile {
    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn spec(&self) -> &RadialDensitySpec {
        &self.spec
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Normalized colatitude density at the grid nodes (per radian).
    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn cdf_values(&self) -> &[f64] {
        &self.cdf
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn support_end(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    /// `int_0^{support} f(t) sin^{n-1}(t) dt` for the unnormalized `f`.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Normalized colatitude density evaluated in closed form (0 outside the
    /// support).
    pub fn density_at(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.support_end() {
            return 0.0;
        }
        self.spec.radial_weight(t) / self.normalizer
    }

    /// `ln` of [`density_at`](Self::density_at), finite wherever the density
    /// is positive even when the density itself underflows.
    pub fn log_density_at(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.support_end() {
            return f64::NEG_INFINITY;
        }
        let sine = if self.spec.n == 1 {
            0.0
        } else {
            (self.spec.n as f64 - 1.0) * t.sin().ln()
        };
        self.spec.family.log_weight(t) + sine - self.normalizer.ln()
    }

    /// Normalized density with respect to the uniform measure on the
    /// half-sphere, divided by the sine factor: `f(t) / Z`.
    pub(crate) fn weight_over_normalizer(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.support_end() {
            return 0.0;
        }
        self.spec.weight(t) / self.normalizer
    }

    /// Piecewise-linear interpolation of the tabulated CDF.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        if !(-1e-12..=FRAC_PI_2 + 1e-12).contains(&t) {
            return Err(Error::usage(format!("colatitude {t} outside [0, pi/2]")));
        }
        if t <= 0.0 {
            return Ok(0.0);
        }
        if t >= self.support_end() {
            return Ok(1.0);
        }
        let pos = t / self.step;
        let i = (pos.floor() as usize).min(self.grid.len() - 2);
        let frac = (t - self.grid[i]) / (self.grid[i + 1] - self.grid[i]);
        Ok(self.cdf[i] + frac * (self.cdf[i + 1] - self.cdf[i]))
    }

    /// `inf { t : F(t) >= p }` for the interpolated CDF; bisection over the
    /// tabulated nodes, then exact inversion on the bracketing segment.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::usage(format!("probability {p} outside [0, 1]")));
        }
        if p == 0.0 {
            return Ok(0.0);
        }
        if p >= 1.0 {
            return Ok(self.support_end());
        }
        // First node with F >= p; F[0] = 0 < p so i >= 1.
        let i = self.cdf.partition_point(|&c| c < p);
        let (f0, f1) = (self.cdf[i - 1], self.cdf[i]);
        let (t0, t1) = (self.grid[i - 1], self.grid[i]);
        Ok(t0 + (p - f0) / (f1 - f0) * (t1 - t0))
    }

    /// `int t g(t) dt`, the mean distance to the pole.
    pub fn mean_radial_distance(&self) -> f64 {
        let vals: Vec<f64> = self
            .grid
            .iter()
            .zip(&self.density)
            .map(|(t, g)| t * g)
            .collect();
        simpson(&vals, self.step).expect("profile grid has an even interval count")
    }
}

/// Weighted point cloud on the sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    points: Vec<SpherePoint>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Weights must be nonnegative and sum to 1 within 1e-10.
    pub fn new(points: Vec<SpherePoint>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::usage("a discrete measure needs at least one point"));
        }
        if points.len() != weights.len() {
            return Err(Error::usage(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        let n = points[0].dim();
        if let Some(p) = points.iter().find(|p| p.dim() != n) {
            return Err(Error::DimensionMismatch(n, p.dim()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::usage("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::usage(format!("weights sum to {total}, expected 1")));
        }
        Ok(DiscreteMeasure { points, weights })
    }

    /// Rescales nonnegative weights to sum to 1.
    pub fn normalized(points: Vec<SpherePoint>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::numerical(format!("total weight is {total}")));
        }
        Self::new(points, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(points: Vec<SpherePoint>) -> Result<Self> {
        let w = 1.0 / points.len().max(1) as f64;
        let len = points.len();
        Self::normalized(points, vec![w; len])
    }

    pub fn points(&self) -> &[SpherePoint] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscretizationScheme {
    /// Colatitude rings times equally spaced longitudes.
    Grid,
    /// Equal-area Fibonacci lattice on the support cap.
    Fibonacci,
}

/// Discretizes a radial measure on the 2-sphere.
///
/// `Grid` produces `rings x ceil(count / rings)` nodes with
/// `rings ~ sqrt(count / 2)`, weighted by `g(t) dt dtheta / 2pi`; `seed`
/// picks a longitude phase per ring. `Fibonacci` produces exactly `count`
/// equal-area lattice points on the support cap weighted by `f(d(x, N))`;
/// `seed` picks a global longitude phase.
pub fn discretize_on_sphere(
    profile: &RadialProfile,
    count: usize,
    scheme: DiscretizationScheme,
    seed: u64,
) -> Result<DiscreteMeasure> {
    if profile.n() != 2 {
        return Err(Error::UnsupportedDimension(profile.n()));
    }
    if count < 4 {
        return Err(Error::usage(format!(
            "count must be at least 4, got {count}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let end = profile.support_end();
    let (points, weights) = match scheme {
        DiscretizationScheme::Grid => {
            let rings = ((count as f64 / 2.0).sqrt().round() as usize).max(2);
            let per_ring = count.div_ceil(rings);
            let dt = end / rings as f64;
            let dtheta = 2.0 * PI / per_ring as f64;
            let mut points = Vec::with_capacity(rings * per_ring);
            let mut weights = Vec::with_capacity(rings * per_ring);
            for i in 0..rings {
                let t = (i as f64 + 0.5) * dt;
                let w = profile.density_at(t) * dt * dtheta / (2.0 * PI);
                let phase: f64 = rng.random::<f64>() * dtheta;
                for j in 0..per_ring {
                    points.push(SpherePoint::from_polar(t, phase + j as f64 * dtheta));
                    weights.push(w);
                }
            }
            (points, weights)
        }
        DiscretizationScheme::Fibonacci => {
            let golden = (1.0 + 5f64.sqrt()) / 2.0;
            let span = 1.0 - end.cos();
            let phase: f64 = rng.random::<f64>() * 2.0 * PI;
            let mut points = Vec::with_capacity(count);
            let mut weights = Vec::with_capacity(count);
            for k in 0..count {
                let z = 1.0 - (k as f64 + 0.5) / count as f64 * span;
                let t = z.clamp(-1.0, 1.0).acos();
                let lon = 2.0 * PI * (k as f64 / golden).fract() + phase;
                points.push(SpherePoint::from_polar(t, lon));
                weights.push(profile.spec().weight(t));
            }
            (points, weights)
        }
    };
    DiscreteMeasure::normalized(points, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform2() -> RadialProfile {
        build_profile(&RadialDensitySpec::uniform(2).unwrap(), DEFAULT_GRID_SIZE).unwrap()
    }

    #[test]
    fn uniform_profile_is_sine() {
        let p = uniform2();
        for (i, (&t, &g)) in p.grid().iter().zip(p.density()).enumerate().step_by(97) {
            assert!((g - t.sin()).abs() < 1e-12, "density at node {i}");
            assert!(
                (p.cdf_values()[i] - (1.0 - t.cos())).abs() < 1e-12,
                "cdf at node {i}"
            );
        }
        assert!((p.normalizer() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cdf_and_quantile_examples() {
        let p = uniform2();
        assert!((p.cdf(PI / 3.0).unwrap() - 0.5).abs() < 1e-7);
        assert_eq!(p.cdf(0.0).unwrap(), 0.0);
        assert_eq!(p.cdf(FRAC_PI_2).unwrap(), 1.0);
        assert_eq!(p.quantile(0.0).unwrap(), 0.0);
        assert!((p.quantile(0.5).unwrap() - PI / 3.0).abs() < 1e-7);
        assert_eq!(p.quantile(1.0).unwrap(), FRAC_PI_2);
    }

    #[test]
    fn range_errors() {
        let p = uniform2();
        assert!(matches!(p.cdf(-0.1), Err(Error::Usage(_))));
        assert!(matches!(p.cdf(2.0), Err(Error::Usage(_))));
        assert!(matches!(p.quantile(1.5), Err(Error::Usage(_))));
        assert!(matches!(p.quantile(-1e-3), Err(Error::Usage(_))));
    }

    #[test]
    fn profile_preconditions() {
        let spec = RadialDensitySpec::uniform(2).unwrap();
        assert!(build_profile(&spec, 32).is_err());
        assert!(build_profile(&spec, 65).is_err());
        assert!(RadialDensitySpec::gaussian_like(2, 0.0).is_err());
        assert!(RadialDensitySpec::tempered(2, Potential::Linear, -1.0).is_err());
        assert!(RadialDensitySpec::cap(2, 2.0, RadialFamily::Uniform).is_err());
    }

    #[test]
    fn normalization_of_families() {
        for spec in [
            RadialDensitySpec::gaussian_like(2, 1.0).unwrap(),
            RadialDensitySpec::gaussian_like(3, 4.0).unwrap(),
            RadialDensitySpec::tempered(2, Potential::Linear, 0.3).unwrap(),
        ] {
            let p = build_profile(&spec, DEFAULT_GRID_SIZE).unwrap();
            assert_eq!(*p.cdf_values().last().unwrap(), 1.0);
            let mass = simpson(p.density(), p.step()).unwrap();
            assert!((mass - 1.0).abs() < 1e-9);
            assert!(p.cdf_values().windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn cap_truncates_support() {
        let spec = RadialDensitySpec::cap(2, PI / 3.0, RadialFamily::Uniform).unwrap();
        let p = build_profile(&spec, DEFAULT_GRID_SIZE).unwrap();
        assert_eq!(p.cdf(PI / 3.0).unwrap(), 1.0);
        assert_eq!(p.cdf(1.2).unwrap(), 1.0);
        assert_eq!(p.quantile(1.0).unwrap(), PI / 3.0);
        // Uniform on a cap: F(t) = (1 - cos t) / (1 - cos rho).
        assert!((p.cdf(0.5).unwrap() - (1.0 - 0.5f64.cos()) / 0.5).abs() < 1e-7);
    }

    #[test]
    fn full_cap_reproduces_base() {
        let base = RadialFamily::GaussianLike { beta: 1.0 };
        let a = build_profile(&RadialDensitySpec::new(2, base.clone()).unwrap(), 1024).unwrap();
        let b = build_profile(&RadialDensitySpec::cap(2, FRAC_PI_2, base).unwrap(), 1024).unwrap();
        for (x, y) in a.cdf_values().iter().zip(b.cdf_values()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn mean_distance_uniform() {
        assert!((uniform2().mean_radial_distance() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mean_distance_shrinks_with_temperature() {
        let means: Vec<f64> = [1.0, 0.3, 0.1, 0.03, 0.01]
            .iter()
            .map(|&eps| {
                let spec = RadialDensitySpec::tempered(2, Potential::Quadratic, eps).unwrap();
                build_profile(&spec, DEFAULT_GRID_SIZE)
                    .unwrap()
                    .mean_radial_distance()
            })
            .collect();
        assert!(means.windows(2).all(|w| w[1] < w[0]), "{means:?}");
        // Small eps: colatitude is approximately Rayleigh with scale sqrt(eps / 2).
        let rayleigh = (0.01f64 / 2.0).sqrt() * (PI / 2.0).sqrt();
        assert!((means[4] - rayleigh).abs() < 1e-3);
    }

    #[test]
    fn shrinking_cap_mean_goes_to_zero() {
        let spec = RadialDensitySpec::cap(2, 1e-3, RadialFamily::Uniform).unwrap();
        let p = build_profile(&spec, 256).unwrap();
        assert!(p.mean_radial_distance() < 1e-3);
    }

    #[test]
    fn discretization_weights_and_means() {
        let p = uniform2();
        for scheme in [DiscretizationScheme::Grid, DiscretizationScheme::Fibonacci] {
            let m = discretize_on_sphere(&p, 500, scheme, 1).unwrap();
            assert!((m.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(m.points().iter().all(|x| x.in_upper_half()));
        }
        let fib = discretize_on_sphere(&p, 10_000, DiscretizationScheme::Fibonacci, 3).unwrap();
        let mean: f64 = fib
            .points()
            .iter()
            .zip(fib.weights())
            .map(|(x, w)| w * x.colatitude())
            .sum();
        assert!((mean - 1.0).abs() < 0.02);

        let g = build_profile(
            &RadialDensitySpec::gaussian_like(2, 1.0).unwrap(),
            DEFAULT_GRID_SIZE,
        )
        .unwrap();
        let expected = g.mean_radial_distance();
        for scheme in [DiscretizationScheme::Grid, DiscretizationScheme::Fibonacci] {
            let m = discretize_on_sphere(&g, 10_000, scheme, 5).unwrap();
            let mean: f64 = m
                .points()
                .iter()
                .zip(m.weights())
                .map(|(x, w)| w * x.colatitude())
                .sum();
            assert!(
                (mean - expected).abs() < 0.02,
                "{scheme:?}: {mean} vs {expected}"
            );
        }
    }

    #[test]
    fn discretization_requires_two_sphere() {
        let p = build_profile(&RadialDensitySpec::uniform(3).unwrap(), 256).unwrap();
        assert_eq!(
            discretize_on_sphere(&p, 100, DiscretizationScheme::Grid, 0),
            Err(Error::UnsupportedDimension(3))
        );
    }
}
