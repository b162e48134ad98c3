//! Radial transport maps.
//!
//! Between rotationally invariant measures the optimal map moves each point
//! along its meridian, `x_t -> x_{r(t)}`, where `r` is the monotone
//! rearrangement of the two colatitude laws.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::geometry::{meridian_direction, point_on_meridian, SpherePoint};
use crate::measures::RadialProfile;
use crate::transport::LipschitzReport;

const RANGE_TOL: f64 = 1e-12;
pub const MIN_LIPSCHITZ_NODES: usize = 256;

/// Tabulated colatitude map `r: [0, pi/2] -> [0, pi/2]`.
///
/// Maps produced by [`monotone_map`] are non-decreasing and remember the two
/// profiles they connect, which lets [`radial_lipschitz`] use exact density
/// ratios. Hand-built maps (rigidity candidates, test maps) need not be
/// monotone.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialMap {
    n: usize,
    grid: Vec<f64>,
    values: Vec<f64>,
    profiles: Option<Box<(RadialProfile, RadialProfile)>>,
}

impl RadialMap {
    pub fn new(n: usize, grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::usage(
                "radial map needs matching grid and values of length >= 2",
            ));
        }
        if grid[0] < 0.0 || grid[grid.len() - 1] > FRAC_PI_2 + RANGE_TOL {
            return Err(Error::usage("radial map grid must lie in [0, pi/2]"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::usage("radial map grid must be strictly increasing"));
        }
        if let Some(v) = values
            .iter()
            .find(|v| !(**v >= -RANGE_TOL && **v <= FRAC_PI_2 + RANGE_TOL))
        {
            return Err(Error::usage(format!(
                "radial map value {v} outside [0, pi/2]"
            )));
        }
        Ok(RadialMap {
            n,
            grid,
            values,
            profiles: None,
        })
    }

    /// Samples `r` on `intervals` uniform intervals of `[0, pi/2]`.
    pub fn from_fn(n: usize, intervals: usize, r: impl Fn(f64) -> f64) -> Result<Self> {
        let grid = uniform_grid(intervals);
        let values = grid.iter().map(|&t| r(t)).collect();
        Self::new(n, grid, values)
    }

    pub fn identity(n: usize, intervals: usize) -> Result<Self> {
        Self::from_fn(n, intervals, |t| t)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source_profile(&self) -> Option<&RadialProfile> {
        self.profiles.as_ref().map(|p| &p.0)
    }

    pub fn target_profile(&self) -> Option<&RadialProfile> {
        self.profiles.as_ref().map(|p| &p.1)
    }

    pub fn is_non_decreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[0] <= w[1])
    }

    /// Linear interpolation of `r` at colatitude `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        let g = &self.grid;
        if t <= g[0] {
            return self.values[0];
        }
        if t >= g[g.len() - 1] {
            return self.values[g.len() - 1];
        }
        let i = g.partition_point(|&s| s <= t) - 1;
        let frac = (t - g[i]) / (g[i + 1] - g[i]);
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }
}

pub(crate) fn uniform_grid(intervals: usize) -> Vec<f64> {
    let h = FRAC_PI_2 / intervals as f64;
    (0..=intervals)
        .map(|i| {
            if i == intervals {
                FRAC_PI_2
            } else {
                i as f64 * h
            }
        })
        .collect()
}

/// `r = F_target^{-1} o F_source` on the source grid.
pub fn monotone_map(source: &RadialProfile, target: &RadialProfile) -> Result<RadialMap> {
    if source.n() != target.n() {
        return Err(Error::DimensionMismatch(source.n(), target.n()));
    }
    if (source.support_end() - FRAC_PI_2).abs() > RANGE_TOL {
        return Err(Error::usage(
            "source measure must have full support on the half-sphere",
        ));
    }
    let interior = &source.density()[1..source.density().len() - 1];
    if interior.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::usage("source density must be positive on (0, pi/2)"));
    }
    let values = source
        .cdf_values()
        .iter()
        .map(|&p| target.quantile(p))
        .collect::<Result<Vec<_>>>()?;
    Ok(RadialMap {
        n: source.n(),
        grid: source.grid().to_vec(),
        values,
        profiles: Some(Box::new((source.clone(), target.clone()))),
    })
}

/// Moves `x` along its meridian to colatitude `r(d(x, N))`.
pub fn apply_radial_map(map: &RadialMap, x: &SpherePoint) -> Result<SpherePoint> {
    if x.dim() != map.n {
        return Err(Error::DimensionMismatch(map.n, x.dim()));
    }
    if !x.in_upper_half() {
        return Err(Error::usage("point is not on the upper half-sphere"));
    }
    let t = x.colatitude();
    match meridian_direction(x) {
        None => Ok(SpherePoint::north_pole(map.n)),
        Some(u) => Ok(point_on_meridian(&u, map.value_at(t))),
    }
}

/// Lipschitz constant of the radial map `x_t -> x_{r(t)}`.
///
/// The differential has singular values `|r'(t)|` (along the meridian) and
/// `sin r(t) / sin t` (along the parallels); the constant is the supremum of
/// their maximum over the grid. For maps from [`monotone_map`], `r'` is the
/// density ratio `g_source(t) / g_target(r(t))`; where the target density
/// vanishes (or for hand-built maps) central differences are used. At `t = 0`
/// both stretches equal `r'(0)`. A ratio beyond the range of `f64` yields an
/// infinite constant.
pub fn radial_lipschitz(map: &RadialMap) -> Result<LipschitzReport> {
    let len = map.grid.len();
    if len < MIN_LIPSCHITZ_NODES {
        return Err(Error::usage(format!(
            "radial map has {len} nodes, at least {MIN_LIPSCHITZ_NODES} needed"
        )));
    }
    let mut best = f64::NEG_INFINITY;
    let mut argmax = 0.0;
    for i in 0..len {
        let t = map.grid[i];
        let r = map.values[i];
        let slope = derivative_at(map, i)?;
        let tangential = if t == 0.0 {
            slope.abs()
        } else {
            r.sin() / t.sin()
        };
        let stretch = slope.abs().max(tangential);
        if stretch.is_nan() {
            return Err(Error::numerical(format!("undefined stretch at t = {t}")));
        }
        if stretch > best {
            best = stretch;
            argmax = t;
        }
    }
    Ok(LipschitzReport {
        lip_formula: Some(best),
        lip_empirical: None,
        witness: None,
        witness_indices: None,
        argmax_location: Some(argmax),
    })
}

fn derivative_at(map: &RadialMap, i: usize) -> Result<f64> {
    if let Some(profiles) = &map.profiles {
        let (source, target) = (&profiles.0, &profiles.1);
        let t = map.grid[i];
        let r = map.values[i];
        if t == 0.0 {
            if r == 0.0 {
                // g(t) = w(t) sin^{n-1}(t) with w = f / Z, and
                // sin t / sin r -> 1 / r'(0), hence r'(0)^n = w_s(0) / w_t(0).
                let ws = source.weight_over_normalizer(0.0);
                let wt = target.weight_over_normalizer(0.0);
                if wt > 0.0 {
                    let ratio = ws / wt;
                    let slope = if map.n == 1 {
                        ratio
                    } else {
                        ratio.powf(1.0 / map.n as f64)
                    };
                    if slope.is_finite() {
                        return Ok(slope);
                    }
                }
            }
        } else {
            // Log domain: the target density can underflow long before the
            // ratio leaves the range of f64.
            let lt = target.log_density_at(r);
            if lt > f64::NEG_INFINITY {
                return Ok((source.log_density_at(t) - lt).exp());
            }
        }
    }
    finite_difference(map, i)
}

fn finite_difference(map: &RadialMap, i: usize) -> Result<f64> {
    let (g, v) = (&map.grid, &map.values);
    let last = g.len() - 1;
    let (lo, hi) = match i {
        0 => (0, 1),
        _ if i == last => (last - 1, last),
        _ => (i - 1, i + 1),
    };
    let slope = (v[hi] - v[lo]) / (g[hi] - g[lo]);
    if !slope.is_finite() {
        return Err(Error::numerical(format!(
            "non-finite derivative at t = {}",
            g[i]
        )));
    }
    Ok(slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{geodesic_distance, rotate_about_pole};
    use crate::measures::{build_profile, RadialDensitySpec, RadialFamily, DEFAULT_GRID_SIZE};
    use std::f64::consts::{FRAC_PI_4, PI};

    fn profile(spec: RadialDensitySpec) -> RadialProfile {
        build_profile(&spec, DEFAULT_GRID_SIZE).unwrap()
    }

    #[test]
    fn self_transport_is_identity() {
        let u = profile(RadialDensitySpec::uniform(2).unwrap());
        let map = monotone_map(&u, &u).unwrap();
        let dev = map
            .grid()
            .iter()
            .zip(map.values())
            .map(|(t, r)| (t - r).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-9, "{dev}");
        let lip = radial_lipschitz(&map).unwrap().lip_formula.unwrap();
        assert!((lip - 1.0).abs() < 1e-8, "{lip}");
    }

    #[test]
    fn gaussian_target_pulls_towards_pole() {
        let u = profile(RadialDensitySpec::uniform(2).unwrap());
        let g = profile(RadialDensitySpec::gaussian_like(2, 1.0).unwrap());
        let map = monotone_map(&u, &g).unwrap();
        assert!(map.is_non_decreasing());
        assert!(map
            .grid()
            .iter()
            .zip(map.values())
            .all(|(t, r)| *r <= t + 1e-12));
        assert_eq!(*map.values().last().unwrap(), FRAC_PI_2);
        assert_eq!(map.values()[0], 0.0);
    }

    #[test]
    fn cap_target_maps_equator_to_cap_edge() {
        let u = profile(RadialDensitySpec::uniform(2).unwrap());
        let cap = profile(RadialDensitySpec::cap(2, PI / 3.0, RadialFamily::Uniform).unwrap());
        let map = monotone_map(&u, &cap).unwrap();
        assert_eq!(*map.values().last().unwrap(), PI / 3.0);
        let eq = SpherePoint::from_polar(FRAC_PI_2, 0.7);
        let image = apply_radial_map(&map, &eq).unwrap();
        assert!((image.colatitude() - PI / 3.0).abs() < 1e-12);
        assert!((image.coords()[1].atan2(image.coords()[0]) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn pushforward_matches_cdfs() {
        let u = profile(RadialDensitySpec::uniform(2).unwrap());
        let g = profile(RadialDensitySpec::gaussian_like(2, 2.0).unwrap());
        let map = monotone_map(&u, &g).unwrap();
        for (i, &r) in map.values().iter().enumerate() {
            let lhs = g.cdf(r).unwrap();
            assert!((lhs - u.cdf_values()[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn apply_examples() {
        let id = RadialMap::identity(2, 512).unwrap();
        let x = SpherePoint::from_polar(0.9, -1.3);
        assert!(geodesic_distance(&apply_radial_map(&id, &x).unwrap(), &x).unwrap() < 1e-7);
        let half = RadialMap::from_fn(2, 512, |t| t / 2.0).unwrap();
        let n = SpherePoint::north_pole(2);
        assert_eq!(apply_radial_map(&half, &n).unwrap(), n);
        assert!(apply_radial_map(&half, &n.neg()).is_err());
    }

    #[test]
    fn apply_is_rotation_equivariant() {
        let u = profile(RadialDensitySpec::uniform(2).unwrap());
        let g = profile(RadialDensitySpec::gaussian_like(2, 1.0).unwrap());
        let map = monotone_map(&u, &g).unwrap();
        let x = SpherePoint::from_polar(1.1, 0.4);
        let a = rotate_about_pole(&apply_radial_map(&map, &x).unwrap(), 0.8);
        let b = apply_radial_map(&map, &rotate_about_pole(&x, 0.8)).unwrap();
        assert!(geodesic_distance(&a, &b).unwrap() < 1e-7);
    }

    #[test]
    fn half_map_formula() {
        // max(1/2, sin(t/2)/sin t) = 1 / (2 cos(t/2)) is largest at pi/2.
        let half = RadialMap::from_fn(2, 1024, |t| t / 2.0).unwrap();
        let report = radial_lipschitz(&half).unwrap();
        assert!((report.lip_formula.unwrap() - FRAC_PI_4.sin()).abs() < 1e-12);
        assert_eq!(report.argmax_location, Some(FRAC_PI_2));
    }

    #[test]
    fn lipschitz_needs_dense_grid() {
        let coarse = RadialMap::identity(2, 100).unwrap();
        assert!(matches!(radial_lipschitz(&coarse), Err(Error::Usage(_))));
    }

    #[test]
    fn map_validation() {
        assert!(RadialMap::new(2, vec![0.0, 1.0], vec![0.0]).is_err());
        assert!(RadialMap::new(2, vec![0.0, 0.0], vec![0.0, 0.0]).is_err());
        assert!(RadialMap::new(2, vec![0.0, 1.0], vec![0.0, 2.0]).is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = build_profile(&RadialDensitySpec::uniform(2).unwrap(), 256).unwrap();
        let b = build_profile(&RadialDensitySpec::uniform(3).unwrap(), 256).unwrap();
        assert_eq!(monotone_map(&a, &b), Err(Error::DimensionMismatch(2, 3)));
    }
}
