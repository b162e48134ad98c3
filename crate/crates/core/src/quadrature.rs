//! Composite Simpson quadrature on uniform grids.

use crate::error::{Error, Result};

/// Composite Simpson rule for samples on a uniform grid with spacing `h`.
/// The number of intervals (`values.len() - 1`) must be even.
pub fn simpson(values: &[f64], h: f64) -> Result<f64> {
    let intervals = values.len().saturating_sub(1);
    if intervals < 2 || !intervals.is_multiple_of(2) {
        return Err(Error::usage(format!(
            "simpson needs an even number of intervals, got {intervals}"
        )));
    }
    let mut odd = 0.0;
    let mut even = 0.0;
    for (i, v) in values.iter().enumerate().take(intervals).skip(1) {
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    Ok(h / 3.0 * (values[0] + 4.0 * odd + 2.0 * even + values[intervals]))
}

/// Running integral `F[i] = int_{x_0}^{x_i} f` on a uniform grid.
///
/// Even nodes get exact composite Simpson partial sums; each odd node adds the
/// first half of the Simpson panel it sits in, integrating the same quadratic
/// interpolant, so the two halves of a panel add up to the Simpson panel.
pub fn cumulative_simpson(values: &[f64], h: f64) -> Result<Vec<f64>> {
    let intervals = values.len().saturating_sub(1);
    if intervals < 2 || !intervals.is_multiple_of(2) {
        return Err(Error::usage(format!(
            "simpson needs an even number of intervals, got {intervals}"
        )));
    }
    let mut out = vec![0.0; values.len()];
    let mut acc = 0.0;
    for k in (0..intervals).step_by(2) {
        let (f0, f1, f2) = (values[k], values[k + 1], values[k + 2]);
        out[k + 1] = acc + h / 12.0 * (5.0 * f0 + 8.0 * f1 - f2);
        acc += h / 3.0 * (f0 + 4.0 * f1 + f2);
        out[k + 2] = acc;
    }
    Ok(out)
}
