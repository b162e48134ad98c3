//! Command-line driver for the half-sphere transport experiments.
//!
//! [`parse_config`] reads a JSON experiment config, [`dispatch_run`] runs it
//! and collects records and assertions into a [`RunReport`], and
//! [`write_outputs`] writes `report.json`, one CSV per sweep and SVG plots.

use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use halfsphere_ot::experiments::{self as ex, Assertion, CrosscheckSettings};
use halfsphere_ot::measures::{RadialDensitySpec, RadialFamily};
use halfsphere_ot::transport::RadialMap;
use serde::Serialize;
use serde_json::{json, Value};

pub mod config;
pub mod svg;

pub use config::{
    parse_config, serialize_config, BaseFamily, Candidate, Experiment, ExperimentConfig,
};
use svg::{Plot, Series};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invariant(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }
}

impl From<halfsphere_ot::Error> for CliError {
    fn from(e: halfsphere_ot::Error) -> Self {
        use halfsphere_ot::Error as E;
        match e {
            E::Usage(_) | E::UnsupportedDimension(_) | E::DimensionMismatch(..) => {
                CliError::Config(e.to_string())
            }
            E::Invariant(_) => CliError::Invariant(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

/// A CSV table; values are written with 17 significant digits.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file_name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Durations {
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub version: &'static str,
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub records: Value,
    pub assertions: Vec<Assertion>,
    pub passed: bool,
    /// Wall-clock timings, only when requested; they would otherwise break
    /// byte-identical reruns.
    pub durations: Option<Durations>,
    #[serde(skip)]
    pub tables: Vec<Table>,
    #[serde(skip)]
    pub plots: Vec<Plot>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn to_value(v: impl Serialize) -> Result<Value, CliError> {
    serde_json::to_value(v)
        .map_err(|e| CliError::Numerical(format!("cannot serialize records: {e}")))
}

fn series(label: &str, points: impl Iterator<Item = (f64, f64)>) -> Series {
    Series {
        label: label.into(),
        points: points.collect(),
    }
}

struct Parts {
    records: Value,
    assertions: Vec<Assertion>,
    tables: Vec<Table>,
    plots: Vec<Plot>,
}

impl Parts {
    fn new(records: Value, assertions: Vec<Assertion>) -> Self {
        Parts {
            records,
            assertions,
            tables: Vec::new(),
            plots: Vec::new(),
        }
    }
}

/// Runs the configured experiment. `timed` adds wall-clock durations to
/// the report.
pub fn dispatch_run(config: &ExperimentConfig, timed: bool) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let parts = run_parts(config)?;
    let passed = parts.assertions.iter().all(|a| a.passed);
    Ok(RunReport {
        version: VERSION,
        experiment: config.experiment,
        config: config.clone(),
        records: parts.records,
        assertions: parts.assertions,
        passed,
        durations: timed.then(|| Durations {
            total_seconds: start.elapsed().as_secs_f64(),
        }),
        tables: parts.tables,
        plots: parts.plots,
    })
}

fn missing(field: &str) -> CliError {
    CliError::Config(format!("{field}: missing after defaults"))
}

fn run_parts(c: &ExperimentConfig) -> Result<Parts, CliError> {
    let n = || c.n.ok_or_else(|| missing("n"));
    let grid = || c.grid_size.ok_or_else(|| missing("grid_size"));
    let beta = || c.beta.ok_or_else(|| missing("beta"));
    let seed = || c.seed.ok_or_else(|| missing("seed"));
    let count = || c.count.ok_or_else(|| missing("count"));
    match c.experiment {
        Experiment::Counterexample => {
            let out = ex::run_counterexample(n()?, beta()?, grid()?)?;
            Ok(Parts::new(to_value(&out.records)?, out.assertions))
        }
        Experiment::Cap => {
            let radii = c.radii.as_deref().ok_or_else(|| missing("radii"))?;
            let out = ex::run_cap_restriction(n()?, beta()?, radii, grid()?)?;
            let recs = &out.records.records;
            let mut parts = Parts::new(to_value(&out.records)?, out.assertions.clone());
            parts.tables.push(Table {
                file_name: "cap.csv".into(),
                header: vec!["radius", "lip_formula", "argmax_location", "endpoint"],
                rows: recs
                    .iter()
                    .map(|r| vec![r.radius, r.lip_formula, r.argmax_location, r.endpoint])
                    .collect(),
            });
            parts.plots.push(Plot {
                file_name: "cap.svg".into(),
                title: "Lipschitz constant of cap-restricted targets".into(),
                x_label: "cap radius".into(),
                y_label: "Lipschitz constant".into(),
                log_x: false,
                log_y: false,
                series: vec![
                    series(
                        "lip_formula",
                        recs.iter().map(|r| (r.radius, r.lip_formula)),
                    ),
                    series("1", recs.iter().map(|r| (r.radius, 1.0))),
                ],
            });
            Ok(parts)
        }
        Experiment::Blowup => {
            let eps = c.epsilons.as_deref().ok_or_else(|| missing("epsilons"))?;
            let potential = c.potential.ok_or_else(|| missing("potential"))?;
            let threshold = c.threshold.ok_or_else(|| missing("threshold"))?;
            let out = ex::run_blowup(n()?, potential, eps, grid()?, threshold)?;
            let mut parts = Parts::new(to_value(&out.records)?, out.assertions.clone());
            parts.tables.push(Table {
                file_name: "blowup.csv".into(),
                header: vec![
                    "epsilon",
                    "m",
                    "r_eps",
                    "R_eps",
                    "lower_bound",
                    "lip_formula",
                ],
                rows: out
                    .records
                    .iter()
                    .map(|r| {
                        vec![
                            r.epsilon,
                            r.m,
                            r.r_eps,
                            r.R_eps,
                            r.lower_bound,
                            r.lip_formula,
                        ]
                    })
                    .collect(),
            });
            parts.plots.push(Plot {
                file_name: "blowup.svg".into(),
                title: "Lipschitz blow-up as epsilon decreases".into(),
                x_label: "epsilon".into(),
                y_label: "Lipschitz constant".into(),
                log_x: true,
                log_y: true,
                series: vec![
                    series(
                        "lower_bound",
                        out.records.iter().map(|r| (r.epsilon, r.lower_bound)),
                    ),
                    series(
                        "lip_formula",
                        out.records.iter().map(|r| (r.epsilon, r.lip_formula)),
                    ),
                ],
            });
            Ok(parts)
        }
        Experiment::Concentration => run_concentration(c),
        Experiment::Rigidity => run_rigidity(c),
        Experiment::Metric => {
            let out = ex::run_metric_equivalence(count()?, seed()?)?;
            Ok(Parts::new(to_value(&out.records)?, out.assertions))
        }
        Experiment::SinkhornCrosscheck => {
            let settings = CrosscheckSettings {
                beta: beta()?,
                count: count()?,
                reg_final: c.reg_final.ok_or_else(|| missing("reg_final"))?,
                seed: seed()?,
                grid_size: grid()?,
                tol: c.tol.ok_or_else(|| missing("tol"))?,
                max_iter: c.max_iter.ok_or_else(|| missing("max_iter"))?,
            };
            let out = ex::run_sinkhorn_crosscheck(&settings)?;
            let small = ex::run_small_exact_crosscheck(&[3, 5], 5, 1e-4, settings.seed)?;
            let mut assertions = out.assertions;
            assertions.extend(small.assertions);
            Ok(Parts::new(
                json!({"barycentric": to_value(&out.records)?, "small_instances": to_value(&small.records)?}),
                assertions,
            ))
        }
    }
}

/// Radii of the sphere Monte Carlo check.
fn sphere_t_grid() -> Vec<f64> {
    (1..=30).map(|k| 0.05 * k as f64).collect()
}

fn run_concentration(c: &ExperimentConfig) -> Result<Parts, CliError> {
    let n = c.n.ok_or_else(|| missing("n"))?;
    let base = match c.family.ok_or_else(|| missing("family"))? {
        BaseFamily::Uniform => RadialFamily::Uniform,
        BaseFamily::GaussianLike => RadialFamily::GaussianLike {
            beta: c.beta.ok_or_else(|| missing("beta"))?,
        },
    };
    let rho = c.rho.ok_or_else(|| missing("rho"))?;
    let spec = if rho < FRAC_PI_2 {
        RadialDensitySpec::cap(n, rho, base)?
    } else {
        RadialDensitySpec::new(n, base)?
    };
    let grid = c.grid_size.ok_or_else(|| missing("grid_size"))?;
    let audit = ex::run_concentration_audit(&spec, c.radii.as_deref(), grid)?;
    let samples = c.samples.ok_or_else(|| missing("samples"))?;
    let seed = c.seed.ok_or_else(|| missing("seed"))?;
    let sphere = ex::run_sphere_concentration_check(n, samples, seed, &sphere_t_grid())?;
    let recs = &audit.records.records;
    let mut assertions = audit.assertions.clone();
    assertions.extend(sphere.assertions.iter().cloned());
    let mut parts = Parts::new(
        json!({"audit": to_value(&audit.records)?, "sphere": to_value(&sphere.records)?}),
        assertions,
    );
    parts.tables.push(Table {
        file_name: "concentration.csv".into(),
        header: vec!["r", "lhs", "rhs", "lip"],
        rows: recs
            .iter()
            .map(|r| vec![r.r, r.lhs, r.rhs, r.lip])
            .collect(),
    });
    parts.tables.push(Table {
        file_name: "sphere_concentration.csv".into(),
        header: vec!["t", "empirical", "exact", "bound"],
        rows: sphere
            .records
            .iter()
            .map(|r| vec![r.t, r.empirical, r.exact, r.bound])
            .collect(),
    });
    parts.plots.push(Plot {
        file_name: "concentration.svg".into(),
        title: "Mass away from the cap boundary".into(),
        x_label: "r".into(),
        y_label: "mass".into(),
        log_x: false,
        log_y: false,
        series: vec![
            series("lhs", recs.iter().map(|r| (r.r, r.lhs))),
            series("rhs", recs.iter().map(|r| (r.r, r.rhs))),
        ],
    });
    Ok(parts)
}

fn run_rigidity(c: &ExperimentConfig) -> Result<Parts, CliError> {
    let intervals = c.grid_size.ok_or_else(|| missing("grid_size"))?;
    let tol = c.tol.ok_or_else(|| missing("tol"))?;
    let count = c.count.ok_or_else(|| missing("count"))?;
    let seed = c.seed.ok_or_else(|| missing("seed"))?;
    let mut records = serde_json::Map::new();
    let mut assertions = Vec::new();
    if let Some(candidate) = &c.candidate {
        let map = match candidate {
            Candidate::Identity => RadialMap::identity(1, intervals)?,
            Candidate::Reflection => RadialMap::from_fn(1, intervals, |t| FRAC_PI_2 - t)?,
            Candidate::Scaled { factor } => {
                RadialMap::from_fn(1, intervals, |t| (factor * t).min(FRAC_PI_2))?
            }
            Candidate::Table { values } => {
                let m = values.len() - 1;
                let grid = (0..=m).map(|k| FRAC_PI_2 * k as f64 / m as f64).collect();
                RadialMap::new(1, grid, values.clone())?
            }
        };
        let verdict = ex::run_rigidity_1d(&map, tol)?;
        records.insert("candidate".into(), to_value(&verdict)?);
    }
    if count > 0 {
        let out = ex::run_rigidity_search(count, intervals, tol, seed)?;
        records.insert("search".into(), to_value(&out.records)?);
        assertions.extend(out.assertions);
    }
    Ok(Parts::new(Value::Object(records), assertions))
}

/// Writes `report.json`, the CSV tables and, when `plots` is set, the SVG
/// charts into `dir` (created if needed). Returns the written paths.
pub fn write_outputs(
    report: &RunReport,
    dir: &Path,
    plots: bool,
) -> Result<Vec<PathBuf>, CliError> {
    let io = |p: &Path, e: std::io::Error| CliError::Io(format!("{}: {e}", p.display()));
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut written = Vec::new();
    let mut write = |name: &str, contents: String| -> Result<(), CliError> {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| io(&path, e))?;
        written.push(path);
        Ok(())
    };
    write("report.json", report.to_json())?;
    for t in &report.tables {
        write(&t.file_name, t.to_csv())?;
    }
    if plots {
        for p in &report.plots {
            write(&p.file_name, svg::render(p))?;
        }
    }
    Ok(written)
}

/// Builds the global rayon pool from `HSOT_THREADS` when it is set.
pub fn configure_threads(value: Option<&str>) -> Result<(), CliError> {
    let Some(v) = value else { return Ok(()) };
    let threads: usize = v.trim().parse().ok().filter(|&k| k > 0).ok_or_else(|| {
        CliError::Config(format!(
            "HSOT_THREADS: expected a positive integer, got `{v}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("HSOT_THREADS: {e}")))
}

/// Parsed command line, independent of clap so tests can drive it.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub experiment: Experiment,
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub timings: bool,
    pub plots: bool,
}

pub const DEFAULT_OUTPUT_DIR: &str = "hsot-out";

/// Runs an invocation end to end and returns the report. Outputs are
/// written even when assertions fail.
pub fn execute(inv: &Invocation) -> Result<RunReport, CliError> {
    let text = fs::read_to_string(&inv.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", inv.config.display())))?;
    let mut config = parse_config(&text, Some(inv.experiment))?;
    if let Some(seed) = inv.seed {
        if config.seed.is_none() {
            return Err(CliError::Config(format!(
                "seed: not used by experiment `{}`",
                config.experiment
            )));
        }
        config.seed = Some(seed);
    }
    let report = dispatch_run(&config, inv.timings)?;
    let dir = inv
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    write_outputs(&report, &dir, inv.plots)?;
    Ok(report)
}
