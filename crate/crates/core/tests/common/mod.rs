//! Reference computations for the integration tests. Nothing here calls into
//! the library's quadrature or profile code.

#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    (1..=order)
        .map(|i| {
            let mut x = (PI * (i as f64 - 0.25) / (order as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=order {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = order as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Composite 20-point Gauss-Legendre over `panels` panels.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let rule = gauss_legendre(20);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let mid = a + (p as f64 + 0.5) * h;
            rule.iter()
                .map(|(x, w)| w * f(mid + 0.5 * h * x))
                .sum::<f64>()
                * 0.5
                * h
        })
        .sum()
}

/// Colatitude law on S^2_+ with density proportional to `w(t) sin t`.
pub struct Law2<F: Fn(f64) -> f64> {
    pub w: F,
    pub end: f64,
    pub mass: f64,
}

impl<F: Fn(f64) -> f64> Law2<F> {
    pub fn new(w: F, end: f64) -> Self {
        let mass = integrate(|t| w(t) * t.sin(), 0.0, end, 64);
        Law2 { w, end, mass }
    }

    pub fn density(&self, t: f64) -> f64 {
        if t > self.end {
            0.0
        } else {
            (self.w)(t) * t.sin() / self.mass
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        let t = t.min(self.end);
        integrate(|s| (self.w)(s) * s.sin(), 0.0, t, 16) / self.mass
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, self.end);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Radial map from the uniform law, `r = F^{-1}(1 - cos t)`.
    pub fn map(&self, t: f64) -> f64 {
        self.quantile(1.0 - t.cos())
    }

    /// `max(r', sin r / sin t)` sampled on `samples` interior points plus the
    /// endpoint, with `r' = sin t / g(r(t))`.
    pub fn lipschitz(&self, samples: usize) -> f64 {
        (1..=samples)
            .map(|k| {
                let t = FRAC_PI_2 * k as f64 / samples as f64;
                let r = self.map(t);
                let g = self.density(r);
                let radial = if g > 0.0 { t.sin() / g } else { f64::INFINITY };
                radial.max(r.sin() / t.sin())
            })
            .fold(0.0, f64::max)
    }
}

pub fn gaussian_weight(beta: f64) -> impl Fn(f64) -> f64 {
    move |t| (-beta * t * t).exp()
}
