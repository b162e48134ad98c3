//! Spherical geometry on the unit sphere of `R^{n+1}`.
//!
//! Points are stored in ambient coordinates. The last coordinate is the
//! height; the north pole `N = (0, …, 0, 1)` is the center of the half-sphere
//! `{x : x_{n+1} >= 0}` and the equator is `{x_{n+1} = 0}`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const UNIT_NORM_TOL: f64 = 1e-12;
const TANGENT_TOL: f64 = 1e-10;
const ROTATION_TOL: f64 = 1e-10;

/// A unit vector in `R^{n+1}`, i.e. a point of the n-sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpherePoint {
    coords: Vec<f64>,
}

impl SpherePoint {
    /// Wraps coordinates that already have unit norm (within 1e-12).
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::usage("a sphere point needs at least 2 coordinates"));
        }
        let norm = norm(&coords);
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::usage(format!(
                "coordinates have norm {norm}, expected 1"
            )));
        }
        Ok(SpherePoint { coords })
    }

    /// Projects a nonzero vector onto the sphere.
    pub fn normalized(mut coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::usage("a sphere point needs at least 2 coordinates"));
        }
        let norm = norm(&coords);
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::usage("cannot normalize a zero or non-finite vector"));
        }
        coords.iter_mut().for_each(|c| *c /= norm);
        Ok(SpherePoint { coords })
    }

    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        SpherePoint { coords }
    }

    pub fn north_pole(n: usize) -> Self {
        let mut coords = vec![0.0; n + 1];
        coords[n] = 1.0;
        SpherePoint { coords }
    }

    /// The standard basis vector `e_{axis+1}` (zero-based `axis`).
    pub fn basis(n: usize, axis: usize) -> Result<Self> {
        if axis > n {
            return Err(Error::usage(format!(
                "axis {axis} out of range for n = {n}"
            )));
        }
        let mut coords = vec![0.0; n + 1];
        coords[axis] = 1.0;
        Ok(SpherePoint { coords })
    }

    /// Point of the upper half-sphere at colatitude `t` and, on the 2-sphere,
    /// longitude `phi`.
    pub fn from_polar(colatitude: f64, longitude: f64) -> Self {
        let (s, c) = colatitude.sin_cos();
        SpherePoint {
            coords: vec![s * longitude.cos(), s * longitude.sin(), c],
        }
    }

    /// Sphere dimension `n` (the ambient dimension is `n + 1`).
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn height(&self) -> f64 {
        self.coords[self.coords.len() - 1]
    }

    /// Geodesic distance to the north pole.
    pub fn colatitude(&self) -> f64 {
        self.height().clamp(-1.0, 1.0).acos()
    }

    pub fn in_upper_half(&self) -> bool {
        self.height() >= -UNIT_NORM_TOL
    }

    pub fn dot(&self, other: &SpherePoint) -> f64 {
        dot(&self.coords, &other.coords)
    }

    pub fn neg(&self) -> SpherePoint {
        SpherePoint {
            coords: self.coords.iter().map(|c| -c).collect(),
        }
    }

    fn check_same_dim(&self, other: &SpherePoint) -> Result<()> {
        if self.coords.len() != other.coords.len() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(())
    }
}

/// A tangent vector at `base`; its length is an arclength in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: SpherePoint,
    direction: Vec<f64>,
}

impl TangentVector {
    pub fn new(base: SpherePoint, direction: Vec<f64>) -> Result<Self> {
        if direction.len() != base.coords.len() {
            return Err(Error::DimensionMismatch(
                base.dim(),
                direction.len().saturating_sub(1),
            ));
        }
        let radial = dot(&base.coords, &direction);
        if radial.abs() > TANGENT_TOL * (1.0 + norm(&direction)) {
            return Err(Error::usage(format!(
                "direction is not tangent to base (inner product {radial:e})"
            )));
        }
        Ok(TangentVector { base, direction })
    }

    /// Projects an arbitrary ambient vector onto the tangent space at `base`.
    pub fn projected(base: SpherePoint, mut direction: Vec<f64>) -> Result<Self> {
        if direction.len() != base.coords.len() {
            return Err(Error::DimensionMismatch(
                base.dim(),
                direction.len().saturating_sub(1),
            ));
        }
        let radial = dot(&base.coords, &direction);
        direction
            .iter_mut()
            .zip(&base.coords)
            .for_each(|(d, b)| *d -= radial * b);
        Ok(TangentVector { base, direction })
    }

    pub fn base(&self) -> &SpherePoint {
        &self.base
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn length(&self) -> f64 {
        norm(&self.direction)
    }
}

/// A proper rotation of `R^{n+1}`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    size: usize,
    matrix: Vec<f64>,
}

impl Rotation {
    /// Validates orthogonality and `det = +1` (both within 1e-10).
    pub fn new(size: usize, matrix: Vec<f64>) -> Result<Self> {
        if size < 2 || matrix.len() != size * size {
            return Err(Error::usage(
                "rotation matrix must be square with size >= 2",
            ));
        }
        for i in 0..size {
            for j in 0..size {
                let mtm: f64 = (0..size)
                    .map(|k| matrix[k * size + i] * matrix[k * size + j])
                    .sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                if (mtm - expected).abs() > ROTATION_TOL {
                    return Err(Error::usage("matrix is not orthogonal"));
                }
            }
        }
        let det = determinant(size, &matrix);
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::usage(format!(
                "rotation determinant is {det}, expected 1"
            )));
        }
        Ok(Rotation { size, matrix })
    }

    /// Rotation by `theta` in the plane of the first two coordinates, fixing
    /// every other coordinate (in particular the pole).
    pub fn about_pole(n: usize, theta: f64) -> Self {
        let size = n + 1;
        let mut matrix = vec![0.0; size * size];
        for i in 0..size {
            matrix[i * size + i] = 1.0;
        }
        if size >= 3 {
            let (s, c) = theta.sin_cos();
            matrix[0] = c;
            matrix[1] = -s;
            matrix[size] = s;
            matrix[size + 1] = c;
        }
        Rotation { size, matrix }
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn compose(&self, other: &Rotation) -> Result<Rotation> {
        if self.size != other.size {
            return Err(Error::DimensionMismatch(self.size - 1, other.size - 1));
        }
        let n = self.size;
        let mut matrix = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                matrix[i * n + j] = (0..n)
                    .map(|k| self.matrix[i * n + k] * other.matrix[k * n + j])
                    .sum();
            }
        }
        Ok(Rotation { size: n, matrix })
    }

    pub fn apply(&self, x: &SpherePoint) -> Result<SpherePoint> {
        if x.coords.len() != self.size {
            return Err(Error::DimensionMismatch(self.size - 1, x.dim()));
        }
        let n = self.size;
        let coords = (0..n)
            .map(|i| (0..n).map(|k| self.matrix[i * n + k] * x.coords[k]).sum())
            .collect();
        Ok(SpherePoint { coords })
    }
}

fn determinant(size: usize, matrix: &[f64]) -> f64 {
    // Gaussian elimination with partial pivoting.
    let mut a = matrix.to_vec();
    let mut det = 1.0;
    for col in 0..size {
        let pivot = (col..size)
            .max_by(|&r, &s| a[r * size + col].abs().total_cmp(&a[s * size + col].abs()))
            .unwrap_or(col);
        if a[pivot * size + col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for k in 0..size {
                a.swap(pivot * size + k, col * size + k);
            }
            det = -det;
        }
        let p = a[col * size + col];
        det *= p;
        for row in col + 1..size {
            let factor = a[row * size + col] / p;
            for k in col..size {
                a[row * size + k] -= factor * a[col * size + k];
            }
        }
    }
    det
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `arccos(x · y)` with the dot product clamped to `[-1, 1]`.
pub fn geodesic_distance(x: &SpherePoint, y: &SpherePoint) -> Result<f64> {
    x.check_same_dim(y)?;
    Ok(x.dot(y).clamp(-1.0, 1.0).acos())
}

/// Chordal (ambient Euclidean) distance.
pub fn euclidean_distance(x: &SpherePoint, y: &SpherePoint) -> Result<f64> {
    x.check_same_dim(y)?;
    Ok(x.coords
        .iter()
        .zip(&y.coords)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Exponential map; vectors longer than `pi` are rejected.
pub fn exp_map(v: &TangentVector) -> Result<SpherePoint> {
    let len = v.length();
    if len > std::f64::consts::PI + 1e-12 {
        return Err(Error::usage(format!(
            "tangent vector length {len} exceeds pi"
        )));
    }
    if len == 0.0 {
        return Ok(v.base.clone());
    }
    let (s, c) = len.sin_cos();
    let coords = v
        .base
        .coords
        .iter()
        .zip(&v.direction)
        .map(|(b, d)| c * b + s * d / len)
        .collect();
    // Renormalize to absorb rounding.
    SpherePoint::normalized(coords)
}

/// Point at arclength `s` from `x` on the minimizing geodesic towards `y`.
pub fn geodesic_point(x: &SpherePoint, y: &SpherePoint, s: f64) -> Result<SpherePoint> {
    let d = geodesic_distance(x, y)?;
    if !(s >= 0.0 && s <= d + 1e-12) {
        return Err(Error::usage(format!("arclength {s} outside [0, {d}]")));
    }
    if s == 0.0 {
        return Ok(x.clone());
    }
    if (s - d).abs() <= 1e-15 {
        return Ok(y.clone());
    }
    // Unit tangent at x pointing to y.
    let c = x.dot(y);
    let mut u: Vec<f64> = y
        .coords
        .iter()
        .zip(&x.coords)
        .map(|(b, a)| b - c * a)
        .collect();
    let un = norm(&u);
    if un < 1e-12 {
        return Err(Error::AntipodalAmbiguity);
    }
    u.iter_mut().for_each(|v| *v /= un);
    let (sn, cs) = s.sin_cos();
    SpherePoint::normalized(
        x.coords
            .iter()
            .zip(&u)
            .map(|(a, b)| cs * a + sn * b)
            .collect(),
    )
}

/// Rotation by `theta` of the first two coordinates; the pole is fixed.
pub fn rotate_about_pole(x: &SpherePoint, theta: f64) -> SpherePoint {
    let mut coords = x.coords.clone();
    if coords.len() >= 3 {
        let (s, c) = theta.sin_cos();
        let (a, b) = (coords[0], coords[1]);
        coords[0] = c * a - s * b;
        coords[1] = s * a + c * b;
    }
    SpherePoint { coords }
}

/// Reflection through the equatorial hyperplane (flips the height).
pub fn reflect_equator(x: &SpherePoint) -> SpherePoint {
    let mut coords = x.coords.clone();
    let last = coords.len() - 1;
    coords[last] = -coords[last];
    SpherePoint { coords }
}

/// Unit horizontal direction of `x` (the meridian through `x`), or `None` at
/// the poles.
pub(crate) fn meridian_direction(x: &SpherePoint) -> Option<Vec<f64>> {
    let n = x.coords.len() - 1;
    let mut u = x.coords.clone();
    u[n] = 0.0;
    let un = norm(&u);
    if un < 1e-14 {
        return None;
    }
    u.iter_mut().for_each(|v| *v /= un);
    Some(u)
}

/// Point at colatitude `t` on the meridian with unit horizontal direction `u`.
pub(crate) fn point_on_meridian(u: &[f64], t: f64) -> SpherePoint {
    let (s, c) = t.sin_cos();
    let n = u.len() - 1;
    let mut coords: Vec<f64> = u.iter().map(|v| s * v).collect();
    coords[n] = c;
    SpherePoint { coords }
}

/// I.i.d. uniform samples on the upper half-sphere of `S^n`.
pub fn sample_uniform_halfsphere(n: usize, count: usize, seed: u64) -> Result<Vec<SpherePoint>> {
    if n < 1 {
        return Err(Error::usage("sphere dimension must be at least 1"));
    }
    if count < 1 {
        return Err(Error::usage("count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut v: Vec<f64> = (0..=n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let r = norm(&v);
        if r < 1e-300 {
            continue;
        }
        v.iter_mut().for_each(|c| *c /= r);
        if v[n] < 0.0 {
            v[n] = -v[n];
        }
        out.push(SpherePoint { coords: v });
    }
    Ok(out)
}

/// I.i.d. uniform samples on the whole sphere `S^n`.
pub fn sample_uniform_sphere(n: usize, count: usize, seed: u64) -> Result<Vec<SpherePoint>> {
    if n < 1 {
        return Err(Error::usage("sphere dimension must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: Vec<f64> = (0..=n).map(|_| StandardNormal.sample(&mut rng)).collect();
        if norm(&v) < 1e-300 {
            continue;
        }
        out.push(SpherePoint::normalized(v)?);
    }
    Ok(out)
}
