//! Numerical experiments for the obstructions to contraction on the
//! half-sphere.
//!
//! Every driver returns its records together with the list of checks it
//! performed. A failed check is a finding, not an error: errors are reserved
//! for invalid inputs and numerical breakdowns.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    euclidean_distance, geodesic_distance, sample_uniform_halfsphere, sample_uniform_sphere,
    SpherePoint,
};
use crate::measures::{
    build_profile, discretize_on_sphere, DiscreteMeasure, DiscretizationScheme, Potential,
    RadialDensitySpec, RadialFamily, RadialProfile,
};
use crate::transport::{
    apply_radial_map, barycentric_map, empirical_lipschitz, exact_ot_small, monotone_map,
    radial_lipschitz, sinkhorn_with, LipschitzReport, RadialMap, SinkhornOptions,
};

/// Slack allowed between the blow-up lower bound and the formula constant.
pub const BLOWUP_SLACK: f64 = 1e-6;
/// Default growth threshold for the smallest epsilon of a blow-up sweep.
pub const BLOWUP_THRESHOLD: f64 = 10.0;
pub const CONCENTRATION_SLACK: f64 = 1e-9;
pub const CROSSCHECK_MAX_DEVIATION: f64 = 0.05;
pub const MIN_RIGIDITY_NODES: usize = 128;
pub const SMALL_INSTANCE_TOLERANCE: f64 = 1e-3;

/// A named check with its tolerance and outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(
        name: impl Into<String>,
        tolerance: f64,
        passed: bool,
        detail: impl Into<String>,
    ) -> Self {
        Assertion {
            name: name.into(),
            tolerance,
            passed,
            detail: detail.into(),
        }
    }
}

/// Records of a run plus the checks performed on them.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome<T> {
    pub records: T,
    pub assertions: Vec<Assertion>,
}

impl<T> Outcome<T> {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

fn uniform_profile(n: usize, grid_size: usize) -> Result<RadialProfile> {
    build_profile(&RadialDensitySpec::uniform(n)?, grid_size)
}

/// Lipschitz report of the radial map from the uniform measure to `target`.
pub fn radial_transport_report(
    target: &RadialDensitySpec,
    grid_size: usize,
) -> Result<(RadialMap, LipschitzReport)> {
    let source = uniform_profile(target.n, grid_size)?;
    let target = build_profile(target, grid_size)?;
    let map = monotone_map(&source, &target)?;
    let report = radial_lipschitz(&map)?;
    Ok((map, report))
}

/// Transport from the uniform measure to `exp(-beta d(x, N)^2)`.
pub fn run_counterexample(
    n: usize,
    beta: f64,
    grid_size: usize,
) -> Result<Outcome<LipschitzReport>> {
    if !(beta > 0.0) {
        return Err(Error::usage(format!("beta must be positive, got {beta}")));
    }
    let (_, report) =
        radial_transport_report(&RadialDensitySpec::gaussian_like(n, beta)?, grid_size)?;
    let lip = report.lip_formula.unwrap_or(f64::NAN);
    let assertions = vec![Assertion::new(
        "counterexample.lip_formula_exceeds_one",
        0.0,
        lip > 1.0,
        format!("lip_formula = {lip}"),
    )];
    Ok(Outcome {
        records: report,
        assertions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapRecord {
    pub radius: f64,
    pub lip_formula: f64,
    pub argmax_location: f64,
    /// `r(pi/2)`, the colatitude the equator is sent to.
    pub endpoint: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapSweep {
    pub records: Vec<CapRecord>,
    /// Smallest radius from which every constant in the sweep exceeds 1.
    pub threshold: Option<f64>,
}

/// Transport to the gaussian-like target restricted to caps of growing radius.
pub fn run_cap_restriction(
    n: usize,
    beta: f64,
    radii: &[f64],
    grid_size: usize,
) -> Result<Outcome<CapSweep>> {
    if radii.is_empty() {
        return Err(Error::usage("cap sweep needs at least one radius"));
    }
    if radii.iter().any(|r| !(*r > 0.0 && *r <= FRAC_PI_2))
        || radii.windows(2).any(|w| !(w[1] > w[0]))
    {
        return Err(Error::usage("cap radii must be increasing in (0, pi/2]"));
    }
    let base = RadialFamily::GaussianLike { beta };
    let records = radii
        .par_iter()
        .map(|&radius| {
            let spec = RadialDensitySpec::cap(n, radius, base.clone())?;
            let (map, report) = radial_transport_report(&spec, grid_size)?;
            Ok(CapRecord {
                radius,
                lip_formula: report.lip_formula.unwrap_or(f64::NAN),
                argmax_location: report.argmax_location.unwrap_or(f64::NAN),
                endpoint: *map.values().last().expect("non-empty map"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let first_above = records
        .iter()
        .rposition(|r| !(r.lip_formula > 1.0))
        .map_or(0, |i| i + 1);
    let threshold = records.get(first_above).map(|r| r.radius);
    let last = records.last().expect("non-empty sweep");
    let endpoint_err = records
        .iter()
        .map(|r| (r.endpoint - r.radius).abs())
        .fold(0.0, f64::max);
    let assertions = vec![
        Assertion::new(
            "cap.last_radius_not_contracting",
            0.0,
            last.lip_formula > 1.0,
            format!("lip_formula({}) = {}", last.radius, last.lip_formula),
        ),
        Assertion::new(
            "cap.threshold_exists",
            0.0,
            threshold.is_some(),
            format!("threshold = {threshold:?}"),
        ),
        Assertion::new(
            "cap.equator_maps_to_cap_edge",
            1e-12,
            endpoint_err <= 1e-12,
            format!("max |r(pi/2) - radius| = {endpoint_err:e}"),
        ),
    ];
    Ok(Outcome {
        records: CapSweep { records, threshold },
        assertions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct BlowupRecord {
    pub epsilon: f64,
    pub m: f64,
    pub r_eps: f64,
    pub R_eps: f64,
    pub lower_bound: f64,
    pub lip_formula: f64,
    /// Set when `1 - sqrt(m)` falls outside `[0, 1]`; the other fields are
    /// then NaN.
    pub skipped: bool,
}

/// Geometric grid from 1 down to 1e-4 (13 values, ratio `10^{-1/3}`).
pub fn default_epsilon_grid() -> Vec<f64> {
    (0..13).map(|k| 10f64.powf(-(k as f64) / 3.0)).collect()
}

fn blowup_record(
    n: usize,
    potential: Potential,
    epsilon: f64,
    grid_size: usize,
) -> Result<BlowupRecord> {
    let spec = RadialDensitySpec::tempered(n, potential, epsilon)?;
    let source = uniform_profile(n, grid_size)?;
    let target = build_profile(&spec, grid_size)?;
    let m = target.mean_radial_distance();
    let p = 1.0 - m.sqrt();
    if !(0.0..=1.0).contains(&p) {
        return Ok(BlowupRecord {
            epsilon,
            m,
            r_eps: f64::NAN,
            R_eps: f64::NAN,
            lower_bound: f64::NAN,
            lip_formula: f64::NAN,
            skipped: true,
        });
    }
    let r_eps = target.quantile(p)?;
    let map = monotone_map(&source, &target)?;
    // Largest grid colatitude still sent into the ball B(N, r_eps).
    let big_r = map
        .grid()
        .iter()
        .zip(map.values())
        .filter(|(_, r)| **r <= r_eps)
        .map(|(t, _)| *t)
        .fold(0.0, f64::max);
    let lower_bound = (FRAC_PI_2 - r_eps) / (FRAC_PI_2 - big_r);
    let lip_formula = radial_lipschitz(&map)?.lip_formula.unwrap_or(f64::NAN);
    Ok(BlowupRecord {
        epsilon,
        m,
        r_eps,
        R_eps: big_r,
        lower_bound,
        lip_formula,
        skipped: false,
    })
}

/// Lipschitz blow-up for tempered targets `exp(-V / eps)` as `eps -> 0`.
pub fn run_blowup(
    n: usize,
    potential: Potential,
    epsilons: &[f64],
    grid_size: usize,
    threshold: f64,
) -> Result<Outcome<Vec<BlowupRecord>>> {
    if epsilons.is_empty() {
        return Err(Error::usage("blow-up sweep needs at least one epsilon"));
    }
    if epsilons.iter().any(|e| !(*e > 0.0)) || epsilons.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::usage("epsilons must be positive and decreasing"));
    }
    let records = epsilons
        .par_iter()
        .map(|&eps| blowup_record(n, potential, eps, grid_size))
        .collect::<Result<Vec<_>>>()?;

    let active: Vec<&BlowupRecord> = records.iter().filter(|r| !r.skipped).collect();
    let worst_gap = active
        .iter()
        .map(|r| r.lower_bound - r.lip_formula)
        .fold(f64::NEG_INFINITY, f64::max);
    let tail_start = active.len() / 2;
    let tail = &active[tail_start..];
    let tail_increasing = tail.windows(2).all(|w| w[1].lower_bound > w[0].lower_bound);
    let final_bound = active.last().map_or(f64::NAN, |r| r.lower_bound);
    let ordered = active.iter().all(|r| {
        0.0 <= r.r_eps && r.r_eps <= r.R_eps && r.R_eps < FRAC_PI_2 && r.lower_bound >= 1.0
    });
    let assertions = vec![
        Assertion::new(
            "blowup.formula_dominates_lower_bound",
            BLOWUP_SLACK,
            !active.is_empty() && worst_gap <= BLOWUP_SLACK,
            format!("max(lower_bound - lip_formula) = {worst_gap:e}"),
        ),
        Assertion::new(
            "blowup.lower_bound_increasing_on_tail",
            0.0,
            tail.len() >= 2 && tail_increasing,
            format!("tail of {} records", tail.len()),
        ),
        Assertion::new(
            "blowup.final_lower_bound_exceeds_threshold",
            threshold,
            final_bound > threshold,
            format!("final lower_bound = {final_bound}"),
        ),
        Assertion::new(
            "blowup.radii_ordered",
            0.0,
            ordered,
            "0 <= r_eps <= R_eps < pi/2 and lower_bound >= 1",
        ),
    ];
    Ok(Outcome {
        records,
        assertions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationRecord {
    pub r: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub lip: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationAudit {
    pub records: Vec<ConcentrationRecord>,
    pub support_radius: f64,
    /// Requested radii at or beyond `pi L / 2`, left out of the audit.
    pub rejected: Vec<f64>,
}

/// `count` equally spaced radii strictly inside `(0, limit)`.
pub fn open_interval_grid(limit: f64, count: usize) -> Vec<f64> {
    (1..=count)
        .map(|k| limit * k as f64 / (count + 1) as f64)
        .collect()
}

/// Checks `nu(D minus (dD)^r) <= 2 exp(-(n-1) r^2 / (2 L^2))` for the cap
/// target `D = B(N, rho)` and the radial transport's Lipschitz constant `L`.
/// With `r_grid = None` a 1000-point grid of `(0, pi L / 2)` is used.
pub fn run_concentration_audit(
    target: &RadialDensitySpec,
    r_grid: Option<&[f64]>,
    grid_size: usize,
) -> Result<Outcome<ConcentrationAudit>> {
    let (_, report) = radial_transport_report(target, grid_size)?;
    let lip = report.lip_formula.unwrap_or(f64::NAN);
    if !lip.is_finite() {
        return Err(Error::numerical(
            "radial map has no finite Lipschitz constant",
        ));
    }
    let profile = build_profile(target, grid_size)?;
    let rho = profile.support_end();
    let limit = PI * lip / 2.0;
    let requested = match r_grid {
        Some(g) => g.to_vec(),
        None => open_interval_grid(limit, 1000),
    };
    let (radii, rejected): (Vec<f64>, Vec<f64>) =
        requested.into_iter().partition(|r| *r > 0.0 && *r < limit);
    let n = target.n as f64;
    let records = radii
        .iter()
        .map(|&r| {
            let lhs = if r >= rho { 0.0 } else { profile.cdf(rho - r)? };
            let rhs = 2.0 * (-(n - 1.0) * r * r / (2.0 * lip * lip)).exp();
            Ok(ConcentrationRecord { r, lhs, rhs, lip })
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = records
        .iter()
        .map(|c| c.lhs - c.rhs)
        .fold(f64::NEG_INFINITY, f64::max);
    let assertions = vec![Assertion::new(
        "concentration.mass_away_from_boundary_bounded",
        CONCENTRATION_SLACK,
        !records.is_empty() && worst <= CONCENTRATION_SLACK,
        format!(
            "max(lhs - rhs) = {worst:e} over {} radii, {} rejected",
            records.len(),
            rejected.len()
        ),
    )];
    Ok(Outcome {
        records: ConcentrationAudit {
            records,
            support_radius: rho,
            rejected,
        },
        assertions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SphereConcentrationRecord {
    pub t: f64,
    /// Fraction of samples farther than `t` from the lower hemisphere.
    pub empirical: f64,
    pub exact: f64,
    pub bound: f64,
}

/// Monte Carlo check of `sigma(S^n minus A^t) <= exp(-(n-1) t^2 / 2)` with
/// `A` the lower hemisphere, whose complement of the `t`-neighbourhood is
/// `{x_{n+1} >= sin t}`.
pub fn run_sphere_concentration_check(
    n: usize,
    samples: usize,
    seed: u64,
    t_grid: &[f64],
) -> Result<Outcome<Vec<SphereConcentrationRecord>>> {
    let pts = sample_uniform_sphere(n, samples, seed)?;
    let mut heights: Vec<f64> = pts.iter().map(SpherePoint::height).collect();
    heights.sort_by(f64::total_cmp);
    let records: Vec<_> = t_grid
        .iter()
        .map(|&t| {
            let below = heights.partition_point(|&h| h < t.sin());
            let empirical = (heights.len() - below) as f64 / heights.len() as f64;
            // Exact cap mass is only closed-form on S^2.
            let exact = if n == 2 {
                (1.0 - t.sin()) / 2.0
            } else {
                f64::NAN
            };
            let bound = (-(n as f64 - 1.0) * t * t / 2.0).exp();
            SphereConcentrationRecord {
                t,
                empirical,
                exact,
                bound,
            }
        })
        .collect();
    let worst = records
        .iter()
        .map(|r| r.empirical - r.bound)
        .fold(f64::NEG_INFINITY, f64::max);
    let assertions = vec![Assertion::new(
        "concentration.sphere_monte_carlo",
        0.0,
        worst <= 0.0,
        format!("max(empirical - bound) = {worst:e} at {samples} samples"),
    )];
    Ok(Outcome {
        records,
        assertions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Identity,
    Reflection,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RigidityVerdict {
    pub classification: Classification,
    pub violation_witness: Option<(f64, f64)>,
    /// Sup distance to the nearest of `t` and `pi/2 - t` (for rejected maps,
    /// the size of the violation).
    pub deviation: f64,
}

/// Decides whether a tabulated `r: [0, pi/2] -> [0, pi/2]` is 1-Lipschitz
/// (all pairs, up to `tol`) and onto (its range reaches within half a grid
/// spacing of both endpoints). Such maps must be the identity or the
/// reflection `t -> pi/2 - t`; with spacing `h` the deviation is at most
/// `3h/2 + 2 tol`, and exceeding it is reported as an invariant violation.
pub fn run_rigidity_1d(candidate: &RadialMap, tol: f64) -> Result<RigidityVerdict> {
    let t = candidate.grid();
    let r = candidate.values();
    if t.len() < MIN_RIGIDITY_NODES {
        return Err(Error::usage(format!(
            "rigidity check needs at least {MIN_RIGIDITY_NODES} nodes, got {}",
            t.len()
        )));
    }
    if t[0] != 0.0 || (t[t.len() - 1] - FRAC_PI_2).abs() > 1e-12 {
        return Err(Error::usage("candidate must be tabulated on [0, pi/2]"));
    }
    if !(tol >= 0.0) {
        return Err(Error::usage("tolerance must be nonnegative"));
    }
    let h = t.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);

    let mut worst: Option<(f64, usize, usize)> = None;
    for i in 0..t.len() {
        for j in i + 1..t.len() {
            let excess = (r[j] - r[i]).abs() - (t[j] - t[i]);
            if excess > tol && worst.is_none_or(|(w, _, _)| excess > w) {
                worst = Some((excess, i, j));
            }
        }
    }
    if let Some((excess, i, j)) = worst {
        return Ok(RigidityVerdict {
            classification: Classification::Rejected,
            violation_witness: Some((t[i], t[j])),
            deviation: excess,
        });
    }
    let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let gap = lo.max(FRAC_PI_2 - hi);
    if gap > h / 2.0 {
        return Ok(RigidityVerdict {
            classification: Classification::Rejected,
            violation_witness: Some((lo, hi)),
            deviation: gap,
        });
    }
    let sup = |f: &dyn Fn(f64) -> f64| {
        t.iter()
            .zip(r)
            .map(|(&s, &v)| (v - f(s)).abs())
            .fold(0.0, f64::max)
    };
    let dev_id = sup(&|s| s);
    let dev_refl = sup(&|s| FRAC_PI_2 - s);
    let (classification, deviation) = if dev_id <= dev_refl {
        (Classification::Identity, dev_id)
    } else {
        (Classification::Reflection, dev_refl)
    };
    let bound = 1.5 * h + 2.0 * tol;
    if deviation > bound {
        return Err(Error::Invariant(format!(
            "1-Lipschitz onto map at distance {deviation:e} from identity and reflection (bound {bound:e})"
        )));
    }
    Ok(RigidityVerdict {
        classification,
        violation_witness: None,
        deviation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RigiditySearch {
    pub candidates: usize,
    pub admissible: usize,
    pub identity: usize,
    pub reflection: usize,
    pub rejected: usize,
    pub max_deviation: f64,
    pub grid_spacing: f64,
}

/// Random candidate map on `intervals` uniform intervals. The families mix
/// small perturbations of the two rigid maps (which may pass both tests)
/// with generic maps (which should fail one of them).
pub fn random_candidate(rng: &mut impl Rng, intervals: usize, tol: f64) -> Result<RadialMap> {
    let h = FRAC_PI_2 / intervals as f64;
    let kind = rng.random_range(0..7);
    let reflect = rng.random_bool(0.5);
    let base = move |t: f64| if reflect { FRAC_PI_2 - t } else { t };
    let grid: Vec<f64> = (0..=intervals)
        .map(|i| {
            if i == intervals {
                FRAC_PI_2
            } else {
                i as f64 * h
            }
        })
        .collect();
    let values: Vec<f64> = match kind {
        // Rigid map plus noise of random amplitude (tiny ones pass).
        0 => {
            let amp = tol * 10f64.powf(rng.random_range(-3.0..3.0));
            grid.iter()
                .map(|&t| base(t) + amp * rng.random_range(-1.0..1.0))
                .collect()
        }
        // Rigid map shifted and clipped.
        1 => {
            let shift = h * rng.random_range(-1.0..1.0);
            grid.iter().map(|&t| base(t) + shift).collect()
        }
        // Fold |t - c| (or its reflection): surjective only for c near an end.
        2 => {
            let c = if rng.random_bool(0.5) {
                rng.random_range(0.0..h)
            } else {
                rng.random_range(0.0..FRAC_PI_2)
            };
            grid.iter().map(|&t| base((t - c).abs())).collect()
        }
        // Random walk with slopes in [-1, 1].
        3 => {
            let mut v = rng.random_range(0.0..FRAC_PI_2);
            let mut out = Vec::with_capacity(grid.len());
            for _ in &grid {
                out.push(v);
                v += h * rng.random_range(-1.0..1.0);
            }
            out
        }
        // Sorted uniforms pinned to the endpoints (monotone, onto, rarely 1-Lipschitz).
        4 => {
            let mut v: Vec<f64> = (0..grid.len())
                .map(|_| rng.random_range(0.0..FRAC_PI_2))
                .collect();
            v.sort_by(f64::total_cmp);
            v[0] = 0.0;
            let last = v.len() - 1;
            v[last] = FRAC_PI_2;
            if reflect {
                v.reverse();
            }
            v
        }
        // Rigid map with a localized bump.
        5 => {
            let c = rng.random_range(0.0..FRAC_PI_2);
            let width = rng.random_range(h..0.5);
            let height = rng.random_range(-0.3..0.3) * width;
            grid.iter()
                .map(|&t| base(t) + height * (1.0 - ((t - c) / width).powi(2)).max(0.0))
                .collect()
        }
        // Contraction towards the midpoint.
        _ => {
            let k = rng.random_range(0.9..1.0);
            grid.iter()
                .map(|&t| FRAC_PI_4 + k * (base(t) - FRAC_PI_4))
                .collect()
        }
    };
    let values = values
        .into_iter()
        .map(|v| v.clamp(0.0, FRAC_PI_2))
        .collect();
    RadialMap::new(1, grid, values)
}

/// Classifies `count` random candidates; an admissible map that is neither
/// the identity nor the reflection surfaces as an error.
pub fn run_rigidity_search(
    count: usize,
    intervals: usize,
    tol: f64,
    seed: u64,
) -> Result<Outcome<RigiditySearch>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut search = RigiditySearch {
        candidates: count,
        admissible: 0,
        identity: 0,
        reflection: 0,
        rejected: 0,
        max_deviation: 0.0,
        grid_spacing: FRAC_PI_2 / intervals as f64,
    };
    for _ in 0..count {
        let candidate = random_candidate(&mut rng, intervals, tol)?;
        let verdict = run_rigidity_1d(&candidate, tol)?;
        match verdict.classification {
            Classification::Rejected => search.rejected += 1,
            c => {
                search.admissible += 1;
                search.max_deviation = search.max_deviation.max(verdict.deviation);
                if c == Classification::Identity {
                    search.identity += 1;
                } else {
                    search.reflection += 1;
                }
            }
        }
    }
    let limit = 2.0 * search.grid_spacing;
    let assertions = vec![
        Assertion::new(
            "rigidity.admissible_maps_are_rigid",
            limit,
            search.max_deviation <= limit,
            format!(
                "{} admissible of {}, max deviation {:e}",
                search.admissible, count, search.max_deviation
            ),
        ),
        Assertion::new(
            "rigidity.search_found_admissible_maps",
            0.0,
            search.identity > 0 && search.reflection > 0,
            format!(
                "identity {}, reflection {}",
                search.identity, search.reflection
            ),
        ),
    ];
    Ok(Outcome {
        records: search,
        assertions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HalfAngleReport {
    /// `|T(u(pi/2)) - T(u(-pi/2))| = |u(pi/4) - u(-pi/4)|`.
    pub image_chord: f64,
    /// `|u(pi/2) - u(-pi/2)|`.
    pub input_chord: f64,
    pub euclidean_endpoint_ratio: f64,
    pub geodesic_ratio_min: f64,
    pub geodesic_ratio_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub quadruples: usize,
    pub agreements: usize,
    pub half_angle: HalfAngleReport,
}

fn circle_point(theta: f64) -> SpherePoint {
    SpherePoint::from_raw(vec![theta.cos(), theta.sin()])
}

/// Geodesic and chordal distances order pairs identically; the half-angle
/// map on the unit circle is 1/2-Lipschitz geodesically but not chordally.
pub fn run_metric_equivalence(count: usize, seed: u64) -> Result<Outcome<MetricReport>> {
    if count < 100 {
        return Err(Error::usage(format!(
            "need at least 100 quadruples, got {count}"
        )));
    }
    let pts = sample_uniform_sphere(2, 4 * count, seed)?;
    let mut agreements = 0;
    for q in pts.chunks_exact(4) {
        let geo = geodesic_distance(&q[0], &q[1])? <= geodesic_distance(&q[2], &q[3])?;
        let euc = euclidean_distance(&q[0], &q[1])? <= euclidean_distance(&q[2], &q[3])?;
        if geo == euc {
            agreements += 1;
        }
    }

    let half = |theta: f64| circle_point(theta / 2.0);
    let image_chord = euclidean_distance(&half(FRAC_PI_2), &half(-FRAC_PI_2))?;
    let input_chord = euclidean_distance(&circle_point(FRAC_PI_2), &circle_point(-FRAC_PI_2))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut ratio_min = f64::INFINITY;
    let mut ratio_max = f64::NEG_INFINITY;
    let mut sampled = 0;
    while sampled < count {
        let a: f64 = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
        let b: f64 = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
        // acos loses precision for nearly coincident points.
        if (a - b).abs() < 1e-2 {
            continue;
        }
        let ratio = geodesic_distance(&half(a), &half(b))?
            / geodesic_distance(&circle_point(a), &circle_point(b))?;
        ratio_min = ratio_min.min(ratio);
        ratio_max = ratio_max.max(ratio);
        sampled += 1;
    }
    let half_angle = HalfAngleReport {
        image_chord,
        input_chord,
        euclidean_endpoint_ratio: image_chord / input_chord,
        geodesic_ratio_min: ratio_min,
        geodesic_ratio_max: ratio_max,
    };
    let sqrt2 = 2f64.sqrt();
    let assertions = vec![
        Assertion::new(
            "metric.order_biconditional",
            0.0,
            agreements == count,
            format!("{agreements} of {count} quadruples agree"),
        ),
        Assertion::new(
            "metric.half_angle_image_chord",
            1e-12,
            (image_chord - sqrt2).abs() <= 1e-12,
            format!("|T(pi/2) - T(-pi/2)| = {image_chord}"),
        ),
        Assertion::new(
            "metric.half_angle_input_chord",
            1e-12,
            (input_chord - 2.0).abs() <= 1e-12,
            format!("|u(pi/2) - u(-pi/2)| = {input_chord}"),
        ),
        Assertion::new(
            "metric.half_angle_geodesic_ratio",
            1e-9,
            (ratio_min - 0.5).abs() <= 1e-9 && (ratio_max - 0.5).abs() <= 1e-9,
            format!("ratio in [{ratio_min}, {ratio_max}]"),
        ),
        Assertion::new(
            "metric.half_angle_not_half_lipschitz_chordally",
            1e-12,
            (half_angle.euclidean_endpoint_ratio - sqrt2 / 2.0).abs() <= 1e-12
                && half_angle.euclidean_endpoint_ratio > 0.5,
            format!("endpoint ratio = {}", half_angle.euclidean_endpoint_ratio),
        ),
    ];
    Ok(Outcome {
        records: MetricReport {
            quadruples: count,
            agreements,
            half_angle,
        },
        assertions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrosscheckReport {
    pub count: usize,
    pub reg_final: f64,
    pub iterations: usize,
    pub marginal_violation: f64,
    pub max_deviation: f64,
    pub mean_deviation: f64,
    pub lip_empirical: f64,
    pub lip_formula: f64,
    pub witness_indices: Option<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrosscheckSettings {
    pub beta: f64,
    pub count: usize,
    pub reg_final: f64,
    pub seed: u64,
    pub grid_size: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CrosscheckSettings {
    fn default() -> Self {
        CrosscheckSettings {
            beta: 1.0,
            count: 2048,
            reg_final: 1e-3,
            seed: 0,
            grid_size: crate::measures::DEFAULT_GRID_SIZE,
            tol: 1e-6,
            max_iter: 20_000,
        }
    }
}

/// Compares the barycentric map of an annealed Sinkhorn plan on the 2-sphere
/// with the exact radial map.
pub fn run_sinkhorn_crosscheck(settings: &CrosscheckSettings) -> Result<Outcome<CrosscheckReport>> {
    let CrosscheckSettings {
        beta,
        count,
        reg_final,
        seed,
        grid_size,
        tol,
        max_iter,
    } = *settings;
    if count > 4096 {
        return Err(Error::usage(format!(
            "crosscheck count must be at most 4096, got {count}"
        )));
    }
    let target_spec = RadialDensitySpec::gaussian_like(2, beta)?;
    let source_profile = uniform_profile(2, grid_size)?;
    let target_profile = build_profile(&target_spec, grid_size)?;
    let map = monotone_map(&source_profile, &target_profile)?;
    let lip_formula = radial_lipschitz(&map)?.lip_formula.unwrap_or(f64::NAN);

    let source = discretize_on_sphere(
        &source_profile,
        count,
        DiscretizationScheme::Fibonacci,
        seed,
    )?;
    let target = discretize_on_sphere(
        &target_profile,
        count,
        DiscretizationScheme::Fibonacci,
        seed,
    )?;
    let opts = SinkhornOptions {
        tol,
        max_iter,
        ..SinkhornOptions::annealed(reg_final)
    };
    let out = sinkhorn_with(&source, &target, &opts)?;
    let mapped = barycentric_map(&out.plan)?;
    let deviations = source
        .points()
        .iter()
        .zip(&mapped)
        .map(|(x, y)| geodesic_distance(&apply_radial_map(&map, x)?, y))
        .collect::<Result<Vec<_>>>()?;
    let max_deviation = deviations.iter().copied().fold(0.0, f64::max);
    let mean_deviation = deviations.iter().sum::<f64>() / deviations.len() as f64;
    let lip = empirical_lipschitz(source.points(), &mapped)?;
    let lip_empirical = lip.lip_empirical.unwrap_or(f64::NAN);

    let mut assertions = vec![Assertion::new(
        "sinkhorn.barycentric_matches_radial_map",
        CROSSCHECK_MAX_DEVIATION,
        max_deviation < CROSSCHECK_MAX_DEVIATION,
        format!("max deviation {max_deviation} rad, mean {mean_deviation} rad"),
    )];
    if beta >= 1.0 {
        assertions.push(Assertion::new(
            "sinkhorn.discrete_map_not_contracting",
            0.0,
            lip_empirical > 1.0,
            format!("empirical Lipschitz {lip_empirical}, radial formula {lip_formula}"),
        ));
    }
    Ok(Outcome {
        records: CrosscheckReport {
            count,
            reg_final,
            iterations: out.iterations,
            marginal_violation: out.violation,
            max_deviation,
            mean_deviation,
            lip_empirical,
            lip_formula,
            witness_indices: lip.witness_indices,
        },
        assertions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallInstanceRecord {
    pub size: usize,
    pub seed: u64,
    pub exact_cost: f64,
    pub sinkhorn_cost: f64,
}

/// Annealed Sinkhorn against the exact solver on random uniform instances of
/// each size in `sizes`, `per_size` instances each.
pub fn run_small_exact_crosscheck(
    sizes: &[usize],
    per_size: usize,
    reg_final: f64,
    seed: u64,
) -> Result<Outcome<Vec<SmallInstanceRecord>>> {
    let mut records = Vec::with_capacity(sizes.len() * per_size);
    for &size in sizes {
        for k in 0..per_size as u64 {
            let s = seed.wrapping_add(1000 * size as u64 + k);
            let src = DiscreteMeasure::uniform(sample_uniform_halfsphere(2, size, s)?)?;
            let tgt =
                DiscreteMeasure::uniform(sample_uniform_halfsphere(2, size, s ^ 0x5bd1_e995)?)?;
            let exact = exact_ot_small(&src, &tgt)?;
            let opts = SinkhornOptions {
                tol: 1e-9,
                max_iter: 100_000,
                ..SinkhornOptions::annealed(reg_final)
            };
            let out = sinkhorn_with(&src, &tgt, &opts)?;
            records.push(SmallInstanceRecord {
                size,
                seed: s,
                exact_cost: exact.cost(),
                sinkhorn_cost: out.plan.cost(),
            });
        }
    }
    let worst = records
        .iter()
        .map(|r| (r.sinkhorn_cost - r.exact_cost).abs())
        .fold(0.0, f64::max);
    let assertions = vec![Assertion::new(
        "sinkhorn.matches_exact_small_instances",
        SMALL_INSTANCE_TOLERANCE,
        !records.is_empty() && worst < SMALL_INSTANCE_TOLERANCE,
        format!("max cost gap {worst:e} over {} instances", records.len()),
    )];
    Ok(Outcome {
        records,
        assertions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rigidity_examples() {
        let id = RadialMap::identity(1, 256).unwrap();
        let v = run_rigidity_1d(&id, 1e-12).unwrap();
        assert_eq!(v.classification, Classification::Identity);
        assert_eq!(v.deviation, 0.0);
        let refl = RadialMap::from_fn(1, 256, |t| FRAC_PI_2 - t).unwrap();
        assert_eq!(
            run_rigidity_1d(&refl, 1e-12).unwrap().classification,
            Classification::Reflection
        );
        let half = RadialMap::from_fn(1, 256, |t| t / 2.0).unwrap();
        let v = run_rigidity_1d(&half, 1e-12).unwrap();
        assert_eq!(v.classification, Classification::Rejected);
        assert!(v.violation_witness.is_some());
    }

    #[test]
    fn rigidity_rejects_steep_maps() {
        let steep = RadialMap::from_fn(1, 256, |t| (2.0 * t).min(FRAC_PI_2)).unwrap();
        let v = run_rigidity_1d(&steep, 1e-12).unwrap();
        assert_eq!(v.classification, Classification::Rejected);
        let (a, b) = v.violation_witness.unwrap();
        assert!(a < b);
    }

    #[test]
    fn rigidity_needs_enough_nodes() {
        let coarse = RadialMap::identity(1, 64).unwrap();
        assert!(run_rigidity_1d(&coarse, 1e-12).is_err());
    }

    #[test]
    fn default_grid_spans_four_decades() {
        let g = default_epsilon_grid();
        assert_eq!(g[0], 1.0);
        assert!((g[g.len() - 1] - 1e-4).abs() < 1e-18);
        assert!(g.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn blowup_rejects_bad_grids() {
        assert!(run_blowup(2, Potential::Quadratic, &[0.1, 0.2], 256, 10.0).is_err());
        assert!(run_blowup(2, Potential::Quadratic, &[], 256, 10.0).is_err());
    }

    #[test]
    fn cap_rejects_bad_radii() {
        assert!(run_cap_restriction(2, 1.0, &[1.0, 0.5], 256).is_err());
        assert!(run_cap_restriction(2, 1.0, &[0.5, 2.0], 256).is_err());
    }

    #[test]
    fn concentration_rejects_out_of_range_radii() {
        let spec = RadialDensitySpec::uniform(2).unwrap();
        let out = run_concentration_audit(&spec, Some(&[0.5, 1.0, 2.0, -0.1]), 1024).unwrap();
        assert_eq!(out.records.records.len(), 2);
        assert_eq!(out.records.rejected, vec![2.0, -0.1]);
        assert!(out.passed());
    }
}
