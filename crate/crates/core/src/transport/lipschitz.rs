//! Map extraction from couplings and pairwise Lipschitz estimation.

use crate::error::{Error, Result};
use crate::geometry::{geodesic_distance, SpherePoint};
use crate::transport::{LipschitzReport, TransportPlan};

/// Input pairs closer than this are skipped.
pub const MIN_PAIR_DISTANCE: f64 = 1e-8;

/// Barycentric projection: for each source point, the conditional mean of
/// the target points (in ambient coordinates) projected back to the sphere.
pub fn barycentric_map(plan: &TransportPlan) -> Result<Vec<SpherePoint>> {
    let targets = plan.target().points();
    let dim = plan.target().dim() + 1;
    plan.coupling()
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let mass: f64 = row.sum();
            if !(mass > 0.0) {
                return Err(Error::DegenerateBarycenter(i));
            }
            let mut mean = vec![0.0; dim];
            for (p, y) in row.iter().zip(targets) {
                if *p > 0.0 {
                    for (m, c) in mean.iter_mut().zip(y.coords()) {
                        *m += p * c;
                    }
                }
            }
            let norm = mean.iter().map(|c| c * c).sum::<f64>().sqrt() / mass;
            if norm < 1e-9 {
                return Err(Error::DegenerateBarycenter(i));
            }
            SpherePoint::normalized(mean).map_err(|_| Error::DegenerateBarycenter(i))
        })
        .collect()
}

/// `max_{i<j} d(out_i, out_j) / d(in_i, in_j)` over non-degenerate pairs.
pub fn empirical_lipschitz(
    inputs: &[SpherePoint],
    outputs: &[SpherePoint],
) -> Result<LipschitzReport> {
    if inputs.len() != outputs.len() {
        return Err(Error::usage(format!(
            "{} inputs but {} outputs",
            inputs.len(),
            outputs.len()
        )));
    }
    if inputs.len() < 2 {
        return Err(Error::usage("need at least two points"));
    }
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..inputs.len() {
        for j in i + 1..inputs.len() {
            let din = geodesic_distance(&inputs[i], &inputs[j])?;
            if din < MIN_PAIR_DISTANCE {
                continue;
            }
            let ratio = geodesic_distance(&outputs[i], &outputs[j])? / din;
            if best.is_none_or(|(b, _, _)| ratio > b) {
                best = Some((ratio, i, j));
            }
        }
    }
    let (ratio, i, j) = best.ok_or_else(|| Error::usage("all input pairs are degenerate"))?;
    Ok(LipschitzReport {
        lip_formula: None,
        lip_empirical: Some(ratio),
        witness: Some((inputs[i].clone(), inputs[j].clone())),
        witness_indices: Some((i, j)),
        argmax_location: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rotate_about_pole, sample_uniform_halfsphere};
    use crate::measures::DiscreteMeasure;
    use ndarray::Array2;

    #[test]
    fn identity_and_isometry() {
        let pts = sample_uniform_halfsphere(2, 50, 3).unwrap();
        let r = empirical_lipschitz(&pts, &pts).unwrap();
        assert!((r.lip_empirical.unwrap() - 1.0).abs() < 1e-12);
        let rotated: Vec<_> = pts.iter().map(|p| rotate_about_pole(p, 1.1)).collect();
        let r = empirical_lipschitz(&pts, &rotated).unwrap();
        assert!((r.lip_empirical.unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn degenerate_inputs() {
        let p = SpherePoint::north_pole(2);
        assert!(empirical_lipschitz(&[p.clone(), p.clone()], &[p.clone(), p.clone()]).is_err());
        assert!(empirical_lipschitz(std::slice::from_ref(&p), std::slice::from_ref(&p)).is_err());
        assert!(empirical_lipschitz(&[p.clone(), p.clone()], &[p]).is_err());
    }

    #[test]
    fn permutation_plan_returns_paired_targets() {
        let xs = sample_uniform_halfsphere(2, 4, 1).unwrap();
        let ys = sample_uniform_halfsphere(2, 4, 2).unwrap();
        let mut p = Array2::zeros((4, 4));
        for (i, j) in [(0, 2), (1, 0), (2, 3), (3, 1)] {
            p[[i, j]] = 0.25;
        }
        let plan = TransportPlan::new(
            DiscreteMeasure::uniform(xs).unwrap(),
            DiscreteMeasure::uniform(ys.clone()).unwrap(),
            p,
        )
        .unwrap();
        let mapped = barycentric_map(&plan).unwrap();
        for (i, j) in [(0, 2), (1, 0), (2, 3), (3, 1)] {
            for (a, b) in mapped[i].coords().iter().zip(ys[j].coords()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn concentrated_target_collapses() {
        let xs = sample_uniform_halfsphere(2, 3, 1).unwrap();
        let y = SpherePoint::from_polar(0.5, 0.5);
        let ys = vec![y.clone(), SpherePoint::from_polar(1.0, 2.0)];
        let tgt = DiscreteMeasure::new(ys, vec![1.0, 0.0]).unwrap();
        let mut p = Array2::zeros((3, 2));
        for i in 0..3 {
            p[[i, 0]] = 1.0 / 3.0;
        }
        let plan = TransportPlan::new(DiscreteMeasure::uniform(xs).unwrap(), tgt, p).unwrap();
        for z in barycentric_map(&plan).unwrap() {
            assert!(geodesic_distance(&z, &y).unwrap() < 1e-7);
        }
    }

    #[test]
    fn antipodal_balance_is_degenerate() {
        let e = SpherePoint::from_polar(std::f64::consts::FRAC_PI_2, 0.0);
        let ys = vec![e.clone(), e.neg()];
        let tgt = DiscreteMeasure::uniform(ys).unwrap();
        let src = DiscreteMeasure::uniform(vec![SpherePoint::north_pole(2)]).unwrap();
        let p = Array2::from_elem((1, 2), 0.5);
        let plan = TransportPlan::new(src, tgt, p).unwrap();
        assert_eq!(barycentric_map(&plan), Err(Error::DegenerateBarycenter(0)));
    }
}
