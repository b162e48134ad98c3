//! Experiment configuration.
//!
//! A config is a JSON object. Unknown keys are rejected, and so are known
//! keys that the chosen experiment does not read. Parsing fills the defaults
//! of every key the experiment reads, so the parsed config serializes to a
//! complete, reproducible description of the run.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::PathBuf;

use clap::ValueEnum;
use halfsphere_ot::experiments::{default_epsilon_grid, BLOWUP_THRESHOLD};
use halfsphere_ot::measures::{Potential, DEFAULT_GRID_SIZE, MIN_GRID_SIZE};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Counterexample,
    Cap,
    Blowup,
    Concentration,
    Rigidity,
    Metric,
    SinkhornCrosscheck,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Counterexample => "counterexample",
            Experiment::Cap => "cap",
            Experiment::Blowup => "blowup",
            Experiment::Concentration => "concentration",
            Experiment::Rigidity => "rigidity",
            Experiment::Metric => "metric",
            Experiment::SinkhornCrosscheck => "sinkhorn-crosscheck",
        }
    }

    /// Config keys read by this experiment, besides `experiment` and
    /// `output_dir`.
    fn keys(self) -> &'static [&'static str] {
        match self {
            Experiment::Counterexample => &["n", "beta", "grid_size"],
            Experiment::Cap => &["n", "beta", "radii", "grid_size"],
            Experiment::Blowup => &["n", "potential", "epsilons", "grid_size", "threshold"],
            Experiment::Concentration => &[
                "n",
                "family",
                "beta",
                "rho",
                "radii",
                "grid_size",
                "samples",
                "seed",
            ],
            Experiment::Rigidity => &["count", "grid_size", "tol", "seed", "candidate"],
            Experiment::Metric => &["count", "seed"],
            Experiment::SinkhornCrosscheck => &[
                "beta",
                "count",
                "reg_final",
                "tol",
                "max_iter",
                "grid_size",
                "seed",
            ],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Base family of the concentration target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseFamily {
    Uniform,
    GaussianLike,
}

/// Explicit map for the rigidity classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Candidate {
    Identity,
    Reflection,
    /// `t -> factor * t`.
    Scaled {
        factor: f64,
    },
    /// Values on a uniform grid of `[0, pi/2]`.
    Table {
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<BaseFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<Potential>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reg_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<Candidate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// Cap radii used when `radii` is absent: 16 values from 0.3 up to pi/2.
pub fn default_cap_radii() -> Vec<f64> {
    (0..16)
        .map(|k| 0.3 + (FRAC_PI_2 - 0.3) * k as f64 / 15.0)
        .collect()
}

pub const DEFAULT_RIGIDITY_INTERVALS: usize = 256;

fn config_error(field: &str, message: impl fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {message}"))
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(config_error(
            field,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

impl ExperimentConfig {
    fn present_keys(&self) -> Vec<&'static str> {
        let mut keys = Vec::new();
        let mut add = |present: bool, key| {
            if present {
                keys.push(key)
            }
        };
        add(self.n.is_some(), "n");
        add(self.family.is_some(), "family");
        add(self.beta.is_some(), "beta");
        add(self.potential.is_some(), "potential");
        add(self.epsilons.is_some(), "epsilons");
        add(self.threshold.is_some(), "threshold");
        add(self.rho.is_some(), "rho");
        add(self.radii.is_some(), "radii");
        add(self.grid_size.is_some(), "grid_size");
        add(self.count.is_some(), "count");
        add(self.samples.is_some(), "samples");
        add(self.reg_final.is_some(), "reg_final");
        add(self.tol.is_some(), "tol");
        add(self.max_iter.is_some(), "max_iter");
        add(self.seed.is_some(), "seed");
        add(self.candidate.is_some(), "candidate");
        keys
    }

    fn fill_defaults(&mut self) {
        let e = self.experiment;
        let reads = |k: &str| e.keys().contains(&k);
        let rigidity_default_count = if self.candidate.is_some() { 0 } else { 10_000 };
        macro_rules! default {
            ($field:ident, $value:expr) => {
                if reads(stringify!($field)) && self.$field.is_none() {
                    self.$field = Some($value);
                }
            };
        }
        default!(n, 2);
        default!(family, BaseFamily::Uniform);
        default!(potential, Potential::Quadratic);
        default!(epsilons, default_epsilon_grid());
        default!(threshold, BLOWUP_THRESHOLD);
        default!(rho, FRAC_PI_2);
        default!(samples, 100_000);
        default!(seed, 0);
        match e {
            Experiment::Cap => default!(radii, default_cap_radii()),
            Experiment::Rigidity => {
                default!(grid_size, DEFAULT_RIGIDITY_INTERVALS);
                default!(count, rigidity_default_count);
                default!(tol, 1e-12);
            }
            Experiment::Metric => default!(count, 100_000),
            Experiment::SinkhornCrosscheck => {
                default!(count, 2048);
                default!(reg_final, 1e-3);
                default!(tol, 1e-6);
                default!(max_iter, 20_000);
            }
            _ => {}
        }
        default!(grid_size, DEFAULT_GRID_SIZE);
        // gaussian_like targets need beta; the uniform one does not read it.
        let beta_read = match e {
            Experiment::Concentration => self.family == Some(BaseFamily::GaussianLike),
            _ => reads("beta"),
        };
        if beta_read && self.beta.is_none() {
            self.beta = Some(1.0);
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        let e = self.experiment;
        for key in self.present_keys() {
            if !e.keys().contains(&key) {
                return Err(config_error(key, format!("not used by experiment `{e}`")));
            }
        }
        if e == Experiment::Concentration
            && self.family.unwrap_or(BaseFamily::Uniform) == BaseFamily::Uniform
            && self.beta.is_some()
        {
            return Err(config_error("beta", "not used by the uniform family"));
        }
        if let Some(n) = self.n {
            if !(1..=64).contains(&n) {
                return Err(config_error("n", format!("must lie in [1, 64], got {n}")));
            }
        }
        if let Some(g) = self.grid_size {
            let min = if e == Experiment::Rigidity {
                128
            } else {
                MIN_GRID_SIZE
            };
            if g < min || g % 2 != 0 || g > 1 << 20 {
                return Err(config_error(
                    "grid_size",
                    format!("must be even and in [{min}, 2^20], got {g}"),
                ));
            }
        }
        if let Some(b) = self.beta {
            positive("beta", b)?;
        }
        if let Some(eps) = &self.epsilons {
            if eps.is_empty() {
                return Err(config_error("epsilons", "must not be empty"));
            }
            for &x in eps {
                positive("epsilons", x)?;
            }
            if eps.windows(2).any(|w| w[1] >= w[0]) {
                return Err(config_error("epsilons", "must be strictly decreasing"));
            }
        }
        if let Some(t) = self.threshold {
            positive("threshold", t)?;
        }
        if let Some(rho) = self.rho {
            if !(rho > 0.0 && rho <= FRAC_PI_2) {
                return Err(config_error(
                    "rho",
                    format!("must lie in (0, pi/2], got {rho}"),
                ));
            }
        }
        if let Some(radii) = &self.radii {
            if radii.is_empty() {
                return Err(config_error("radii", "must not be empty"));
            }
            for &r in radii {
                positive("radii", r)?;
            }
            if e == Experiment::Cap {
                if radii.iter().any(|&r| r > FRAC_PI_2) {
                    return Err(config_error("radii", "cap radii must not exceed pi/2"));
                }
                if radii.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(config_error("radii", "must be strictly increasing"));
                }
            }
        }
        if let Some(c) = self.count {
            match e {
                Experiment::SinkhornCrosscheck if !(4..=4096).contains(&c) => {
                    return Err(config_error(
                        "count",
                        format!("must lie in [4, 4096], got {c}"),
                    ));
                }
                Experiment::Metric if c < 100 => {
                    return Err(config_error(
                        "count",
                        format!("must be at least 100, got {c}"),
                    ));
                }
                Experiment::Rigidity if c == 0 && self.candidate.is_none() => {
                    return Err(config_error(
                        "count",
                        "must be positive when no candidate is given",
                    ));
                }
                _ => {}
            }
        }
        if let Some(s) = self.samples {
            if s < 100 {
                return Err(config_error(
                    "samples",
                    format!("must be at least 100, got {s}"),
                ));
            }
        }
        if let Some(r) = self.reg_final {
            positive("reg_final", r)?;
        }
        if let Some(t) = self.tol {
            if e == Experiment::Rigidity {
                if !(t >= 0.0 && t.is_finite()) {
                    return Err(config_error("tol", format!("must be nonnegative, got {t}")));
                }
            } else {
                positive("tol", t)?;
            }
        }
        if self.max_iter == Some(0) {
            return Err(config_error("max_iter", "must be positive"));
        }
        match &self.candidate {
            Some(Candidate::Scaled { factor }) if !(factor.is_finite() && *factor >= 0.0) => {
                return Err(config_error(
                    "candidate",
                    format!("factor must be nonnegative, got {factor}"),
                ));
            }
            Some(Candidate::Table { values }) => {
                if values.len() < 129 {
                    return Err(config_error("candidate", "table needs at least 129 values"));
                }
                if values.iter().any(|v| !(0.0..=FRAC_PI_2).contains(v)) {
                    return Err(config_error(
                        "candidate",
                        "table values must lie in [0, pi/2]",
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Parses and validates a config document, filling defaults. `experiment`
/// may be omitted from the document when `expected` supplies it; otherwise
/// the two must agree.
pub fn parse_config(
    text: &str,
    expected: Option<Experiment>,
) -> Result<ExperimentConfig, CliError> {
    let mut value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| CliError::Config(format!("malformed config: {e}")))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| CliError::Config("config must be a JSON object".into()))?;
    match (obj.get("experiment"), expected) {
        (None, Some(e)) => {
            obj.insert(
                "experiment".into(),
                serde_json::Value::String(e.name().into()),
            );
        }
        (None, None) => return Err(config_error("experiment", "missing")),
        _ => {}
    }
    let mut config: ExperimentConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            CliError::Config(format!("invalid config: {}", e.inner()))
        } else {
            CliError::Config(format!("{path}: {}", e.inner()))
        }
    })?;
    if let Some(e) = expected {
        if config.experiment != e {
            return Err(config_error(
                "experiment",
                format!(
                    "config says `{}` but `{e}` was requested",
                    config.experiment
                ),
            ));
        }
    }
    config.validate()?;
    config.fill_defaults();
    Ok(config)
}

pub fn serialize_config(config: &ExperimentConfig) -> String {
    serde_json::to_string_pretty(config).expect("config serializes")
}
