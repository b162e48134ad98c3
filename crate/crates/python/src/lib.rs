//! Python bindings. Experiment records are returned as plain dicts.

use pyo3::exceptions::{PyArithmeticError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use halfsphere_ot::experiments::{self, CrosscheckSettings};
use halfsphere_ot::geometry;
use halfsphere_ot::measures::{self, DiscretizationScheme};
use halfsphere_ot::transport::{self, SinkhornOptions};
use halfsphere_ot::{Error, Potential};

fn err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Usage(_) | Error::DimensionMismatch(..) | Error::UnsupportedDimension(_) => {
            PyValueError::new_err(msg)
        }
        Error::AntipodalAmbiguity | Error::Invariant(_) => PyRuntimeError::new_err(msg),
        _ => PyArithmeticError::new_err(msg),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn potential(name: &str) -> PyResult<Potential> {
    match name {
        "quadratic" => Ok(Potential::Quadratic),
        "linear" => Ok(Potential::Linear),
        other => Err(PyValueError::new_err(format!(
            "unknown potential {other:?}, expected 'quadratic' or 'linear'"
        ))),
    }
}

#[pyclass(
    name = "SpherePoint",
    module = "halfsphere_ot_py",
    frozen,
    from_py_object
)]
#[derive(Clone)]
struct PySpherePoint(halfsphere_ot::SpherePoint);

#[pymethods]
impl PySpherePoint {
    /// Unit vector; `normalize=True` rescales nonzero input first.
    #[new]
    #[pyo3(signature = (coords, normalize = false))]
    fn new(coords: Vec<f64>, normalize: bool) -> PyResult<Self> {
        let p = if normalize {
            halfsphere_ot::SpherePoint::normalized(coords)
        } else {
            halfsphere_ot::SpherePoint::new(coords)
        };
        p.map(Self).map_err(err)
    }

    #[staticmethod]
    fn north_pole(n: usize) -> Self {
        Self(halfsphere_ot::SpherePoint::north_pole(n))
    }

    /// Point of the 2-sphere at the given colatitude and longitude.
    #[staticmethod]
    fn from_polar(colatitude: f64, longitude: f64) -> Self {
        Self(halfsphere_ot::SpherePoint::from_polar(
            colatitude, longitude,
        ))
    }

    #[getter]
    fn coords(&self) -> Vec<f64> {
        self.0.coords().to_vec()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn colatitude(&self) -> f64 {
        self.0.colatitude()
    }

    fn in_upper_half(&self) -> bool {
        self.0.in_upper_half()
    }

    fn distance(&self, other: &PySpherePoint) -> PyResult<f64> {
        geometry::geodesic_distance(&self.0, &other.0).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("SpherePoint({:?})", self.0.coords())
    }

    fn __eq__(&self, other: &PySpherePoint) -> bool {
        self.0 == other.0
    }
}

fn points(items: &[PySpherePoint]) -> Vec<halfsphere_ot::SpherePoint> {
    items.iter().map(|p| p.0.clone()).collect()
}

fn wrap_points(items: Vec<halfsphere_ot::SpherePoint>) -> Vec<PySpherePoint> {
    items.into_iter().map(PySpherePoint).collect()
}

#[pyfunction]
fn geodesic_distance(x: &PySpherePoint, y: &PySpherePoint) -> PyResult<f64> {
    geometry::geodesic_distance(&x.0, &y.0).map_err(err)
}

#[pyfunction]
fn euclidean_distance(x: &PySpherePoint, y: &PySpherePoint) -> PyResult<f64> {
    geometry::euclidean_distance(&x.0, &y.0).map_err(err)
}

/// Exponential map at `base`; `direction` is projected onto the tangent space.
#[pyfunction]
fn exp_map(base: &PySpherePoint, direction: Vec<f64>) -> PyResult<PySpherePoint> {
    let v = geometry::TangentVector::projected(base.0.clone(), direction).map_err(err)?;
    geometry::exp_map(&v).map(PySpherePoint).map_err(err)
}

#[pyfunction]
fn geodesic_point(x: &PySpherePoint, y: &PySpherePoint, s: f64) -> PyResult<PySpherePoint> {
    geometry::geodesic_point(&x.0, &y.0, s)
        .map(PySpherePoint)
        .map_err(err)
}

#[pyfunction]
fn sample_uniform_halfsphere(n: usize, count: usize, seed: u64) -> PyResult<Vec<PySpherePoint>> {
    geometry::sample_uniform_halfsphere(n, count, seed)
        .map(wrap_points)
        .map_err(err)
}

#[pyclass(name = "RadialDensitySpec", module = "halfsphere_ot_py", frozen)]
struct PySpec(halfsphere_ot::RadialDensitySpec);

#[pymethods]
impl PySpec {
    #[staticmethod]
    fn uniform(n: usize) -> PyResult<Self> {
        halfsphere_ot::RadialDensitySpec::uniform(n)
            .map(Self)
            .map_err(err)
    }

    /// `exp(-beta t^2)`.
    #[staticmethod]
    fn gaussian_like(n: usize, beta: f64) -> PyResult<Self> {
        halfsphere_ot::RadialDensitySpec::gaussian_like(n, beta)
            .map(Self)
            .map_err(err)
    }

    /// `exp(-V(t) / epsilon)` with `V` named by `potential`.
    #[staticmethod]
    #[pyo3(signature = (n, epsilon, potential = "quadratic"))]
    fn tempered(n: usize, epsilon: f64, potential: &str) -> PyResult<Self> {
        halfsphere_ot::RadialDensitySpec::tempered(n, self::potential(potential)?, epsilon)
            .map(Self)
            .map_err(err)
    }

    /// `base` restricted to the cap of the given radius.
    #[staticmethod]
    fn cap(radius: f64, base: &PySpec) -> PyResult<Self> {
        halfsphere_ot::RadialDensitySpec::cap(base.0.n, radius, base.0.family.clone())
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }

    #[getter]
    fn support_end(&self) -> f64 {
        self.0.family.support_end()
    }

    fn weight(&self, t: f64) -> f64 {
        self.0.weight(t)
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.0)
    }

    fn __repr__(&self) -> String {
        format!("RadialDensitySpec({:?})", self.0)
    }
}

#[pyclass(name = "RadialProfile", module = "halfsphere_ot_py", frozen)]
struct PyProfile(measures::RadialProfile);

#[pymethods]
impl PyProfile {
    #[new]
    #[pyo3(signature = (spec, grid_size = measures::DEFAULT_GRID_SIZE))]
    fn new(spec: &PySpec, grid_size: usize) -> PyResult<Self> {
        measures::build_profile(&spec.0, grid_size)
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn grid(&self) -> Vec<f64> {
        self.0.grid().to_vec()
    }

    #[getter]
    fn density_values(&self) -> Vec<f64> {
        self.0.density().to_vec()
    }

    #[getter]
    fn normalizer(&self) -> f64 {
        self.0.normalizer()
    }

    fn density(&self, t: f64) -> f64 {
        self.0.density_at(t)
    }

    fn cdf(&self, t: f64) -> PyResult<f64> {
        self.0.cdf(t).map_err(err)
    }

    fn quantile(&self, p: f64) -> PyResult<f64> {
        self.0.quantile(p).map_err(err)
    }

    fn mean_radial_distance(&self) -> f64 {
        self.0.mean_radial_distance()
    }
}

#[pyclass(name = "RadialMap", module = "halfsphere_ot_py", frozen)]
struct PyRadialMap(transport::RadialMap);

#[pymethods]
impl PyRadialMap {
    /// Tabulated map `t -> r(t)` on a uniform grid of `[0, pi/2]`.
    #[new]
    fn new(n: usize, grid: Vec<f64>, values: Vec<f64>) -> PyResult<Self> {
        transport::RadialMap::new(n, grid, values)
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    fn identity(n: usize, intervals: usize) -> PyResult<Self> {
        transport::RadialMap::identity(n, intervals)
            .map(Self)
            .map_err(err)
    }

    /// Monotone rearrangement between two radial laws.
    #[staticmethod]
    fn monotone(source: &PyProfile, target: &PyProfile) -> PyResult<Self> {
        transport::monotone_map(&source.0, &target.0)
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn grid(&self) -> Vec<f64> {
        self.0.grid().to_vec()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    fn __call__(&self, t: f64) -> f64 {
        self.0.value_at(t)
    }

    fn apply(&self, x: &PySpherePoint) -> PyResult<PySpherePoint> {
        transport::apply_radial_map(&self.0, &x.0)
            .map(PySpherePoint)
            .map_err(err)
    }

    /// Dict with `lip_formula` and `argmax_location`.
    fn lipschitz(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &transport::radial_lipschitz(&self.0).map_err(err)?)
    }
}

#[pyclass(name = "DiscreteMeasure", module = "halfsphere_ot_py", frozen)]
struct PyMeasure(measures::DiscreteMeasure);

#[pymethods]
impl PyMeasure {
    /// Uniform weights when `weights` is omitted; otherwise normalized.
    #[new]
    #[pyo3(signature = (points, weights = None))]
    fn new(points: Vec<PySpherePoint>, weights: Option<Vec<f64>>) -> PyResult<Self> {
        let pts = self::points(&points);
        match weights {
            None => measures::DiscreteMeasure::uniform(pts),
            Some(w) => measures::DiscreteMeasure::normalized(pts, w),
        }
        .map(Self)
        .map_err(err)
    }

    /// Discretization of a radial law on the 2-sphere.
    #[staticmethod]
    #[pyo3(signature = (profile, count, scheme = "fibonacci", seed = 0))]
    fn discretize(profile: &PyProfile, count: usize, scheme: &str, seed: u64) -> PyResult<Self> {
        let scheme = match scheme {
            "grid" => DiscretizationScheme::Grid,
            "fibonacci" => DiscretizationScheme::Fibonacci,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown scheme {other:?}, expected 'grid' or 'fibonacci'"
                )))
            }
        };
        measures::discretize_on_sphere(&profile.0, count, scheme, seed)
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn points(&self) -> Vec<PySpherePoint> {
        wrap_points(self.0.points().to_vec())
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "TransportPlan", module = "halfsphere_ot_py", frozen)]
struct PyPlan(transport::TransportPlan);

#[pymethods]
impl PyPlan {
    /// Coupling as a list of rows.
    #[getter]
    fn coupling(&self) -> Vec<Vec<f64>> {
        self.0
            .coupling()
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect()
    }

    fn cost(&self) -> f64 {
        self.0.cost()
    }

    fn marginal_violation(&self) -> f64 {
        self.0.marginal_violation()
    }

    fn barycentric_map(&self) -> PyResult<Vec<PySpherePoint>> {
        transport::barycentric_map(&self.0)
            .map(wrap_points)
            .map_err(err)
    }
}

/// Log-domain Sinkhorn, annealed from reg 1 unless `anneal=False`.
/// Returns `(plan, psi, psi_c)`.
#[pyfunction]
#[pyo3(signature = (source, target, reg, tol = 1e-9, max_iter = 10_000, anneal = true))]
fn sinkhorn(
    source: &PyMeasure,
    target: &PyMeasure,
    reg: f64,
    tol: f64,
    max_iter: usize,
    anneal: bool,
) -> PyResult<(PyPlan, Vec<f64>, Vec<f64>)> {
    let mut opts = if anneal {
        SinkhornOptions::annealed(reg)
    } else {
        SinkhornOptions::new(reg)
    };
    opts.tol = tol;
    opts.max_iter = max_iter;
    let out = transport::sinkhorn_with(&source.0, &target.0, &opts).map_err(err)?;
    Ok((PyPlan(out.plan), out.potentials.psi, out.potentials.psi_c))
}

/// Exact plan for small instances.
#[pyfunction]
fn exact_ot_small(source: &PyMeasure, target: &PyMeasure) -> PyResult<PyPlan> {
    transport::exact_ot_small(&source.0, &target.0)
        .map(PyPlan)
        .map_err(err)
}

/// Largest pairwise distance ratio; dict with `lip_empirical` and `witness_indices`.
#[pyfunction]
fn empirical_lipschitz(
    py: Python<'_>,
    inputs: Vec<PySpherePoint>,
    outputs: Vec<PySpherePoint>,
) -> PyResult<Py<PyAny>> {
    let report =
        transport::empirical_lipschitz(&points(&inputs), &points(&outputs)).map_err(err)?;
    to_py(py, &report)
}

#[pyfunction]
#[pyo3(signature = (n = 2, beta = 1.0, grid_size = measures::DEFAULT_GRID_SIZE))]
fn run_counterexample(
    py: Python<'_>,
    n: usize,
    beta: f64,
    grid_size: usize,
) -> PyResult<Py<PyAny>> {
    to_py(
        py,
        &experiments::run_counterexample(n, beta, grid_size).map_err(err)?,
    )
}

#[pyfunction]
#[pyo3(signature = (radii, n = 2, beta = 1.0, grid_size = measures::DEFAULT_GRID_SIZE))]
fn run_cap_restriction(
    py: Python<'_>,
    radii: Vec<f64>,
    n: usize,
    beta: f64,
    grid_size: usize,
) -> PyResult<Py<PyAny>> {
    to_py(
        py,
        &experiments::run_cap_restriction(n, beta, &radii, grid_size).map_err(err)?,
    )
}

#[pyfunction]
#[pyo3(signature = (
    epsilons = None,
    n = 2,
    potential = "quadratic",
    threshold = 10.0,
    grid_size = measures::DEFAULT_GRID_SIZE,
))]
fn run_blowup(
    py: Python<'_>,
    epsilons: Option<Vec<f64>>,
    n: usize,
    potential: &str,
    threshold: f64,
    grid_size: usize,
) -> PyResult<Py<PyAny>> {
    let epsilons = epsilons.unwrap_or_else(experiments::default_epsilon_grid);
    let out = experiments::run_blowup(
        n,
        self::potential(potential)?,
        &epsilons,
        grid_size,
        threshold,
    )
    .map_err(err)?;
    to_py(py, &out)
}

#[pyfunction]
#[pyo3(signature = (target, grid_size = measures::DEFAULT_GRID_SIZE))]
fn run_concentration_audit(
    py: Python<'_>,
    target: &PySpec,
    grid_size: usize,
) -> PyResult<Py<PyAny>> {
    to_py(
        py,
        &experiments::run_concentration_audit(&target.0, None, grid_size).map_err(err)?,
    )
}

#[pyfunction]
#[pyo3(signature = (candidate, tol = 1e-12))]
fn run_rigidity_1d(py: Python<'_>, candidate: &PyRadialMap, tol: f64) -> PyResult<Py<PyAny>> {
    to_py(
        py,
        &experiments::run_rigidity_1d(&candidate.0, tol).map_err(err)?,
    )
}

#[pyfunction]
#[pyo3(signature = (count = 1000, intervals = 256, tol = 1e-12, seed = 0))]
fn run_rigidity_search(
    py: Python<'_>,
    count: usize,
    intervals: usize,
    tol: f64,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    to_py(
        py,
        &experiments::run_rigidity_search(count, intervals, tol, seed).map_err(err)?,
    )
}

#[pyfunction]
#[pyo3(signature = (count = 10_000, seed = 0))]
fn run_metric_equivalence(py: Python<'_>, count: usize, seed: u64) -> PyResult<Py<PyAny>> {
    to_py(
        py,
        &experiments::run_metric_equivalence(count, seed).map_err(err)?,
    )
}

#[pyfunction]
#[pyo3(signature = (beta = 1.0, count = 2048, reg_final = 1e-3, seed = 0, tol = 1e-6, max_iter = 20_000))]
fn run_sinkhorn_crosscheck(
    py: Python<'_>,
    beta: f64,
    count: usize,
    reg_final: f64,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> PyResult<Py<PyAny>> {
    let settings = CrosscheckSettings {
        beta,
        count,
        reg_final,
        seed,
        tol,
        max_iter,
        ..CrosscheckSettings::default()
    };
    let out = py
        .detach(|| experiments::run_sinkhorn_crosscheck(&settings))
        .map_err(err)?;
    to_py(py, &out)
}

#[pymodule]
fn halfsphere_ot_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PySpherePoint>()?;
    m.add_class::<PySpec>()?;
    m.add_class::<PyProfile>()?;
    m.add_class::<PyRadialMap>()?;
    m.add_class::<PyMeasure>()?;
    m.add_class::<PyPlan>()?;
    m.add_function(wrap_pyfunction!(geodesic_distance, m)?)?;
    m.add_function(wrap_pyfunction!(euclidean_distance, m)?)?;
    m.add_function(wrap_pyfunction!(exp_map, m)?)?;
    m.add_function(wrap_pyfunction!(geodesic_point, m)?)?;
    m.add_function(wrap_pyfunction!(sample_uniform_halfsphere, m)?)?;
    m.add_function(wrap_pyfunction!(sinkhorn, m)?)?;
    m.add_function(wrap_pyfunction!(exact_ot_small, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_lipschitz, m)?)?;
    m.add_function(wrap_pyfunction!(run_counterexample, m)?)?;
    m.add_function(wrap_pyfunction!(run_cap_restriction, m)?)?;
    m.add_function(wrap_pyfunction!(run_blowup, m)?)?;
    m.add_function(wrap_pyfunction!(run_concentration_audit, m)?)?;
    m.add_function(wrap_pyfunction!(run_rigidity_1d, m)?)?;
    m.add_function(wrap_pyfunction!(run_rigidity_search, m)?)?;
    m.add_function(wrap_pyfunction!(run_metric_equivalence, m)?)?;
    m.add_function(wrap_pyfunction!(run_sinkhorn_crosscheck, m)?)?;
    Ok(())
}
