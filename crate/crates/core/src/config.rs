//! Flat TOML experiment configuration.
//!
//! Every key is a scalar or an array of scalars. Prime sets are written as
//! short strings: `"all"`, `"congruence:4:1"` (residues joined by `+`, as in
//! `"congruence:8:1+3"`), or `"thinned:0.4:7"` (density, seed).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::prime_sets::PrimeKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    HqScan,
    AqDichotomy,
    PoissonPhase,
    Smirnov,
    Verify,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::HqScan => "hq-scan",
            Experiment::AqDichotomy => "aq-dichotomy",
            Experiment::PoissonPhase => "poisson-phase",
            Experiment::Smirnov => "smirnov",
            Experiment::Verify => "verify",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub prime_sets: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prime_limit: Option<u64>,
    #[serde(default)]
    pub x: Vec<f64>,
    #[serde(default)]
    pub y: Vec<f64>,
    #[serde(default)]
    pub n: Vec<u64>,
    #[serde(default)]
    pub delta: Vec<f64>,
    #[serde(default)]
    pub loglog_y: Vec<f64>,
    #[serde(default)]
    pub lambda: Vec<f64>,
    #[serde(default)]
    pub v: Vec<f64>,
    #[serde(default)]
    pub k: Vec<u64>,
    #[serde(default)]
    pub u: Vec<f64>,
    #[serde(default)]
    pub c: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixtures: Option<PathBuf>,
}

fn default_seed() -> u64 {
    1
}

pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_SAMPLES: u64 = 100_000;
pub const DEFAULT_MU: f64 = 1.0 / 7.0;

impl ExperimentConfig {
    /// A config with every grid empty.
    pub fn new(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            seed: default_seed(),
            threads: None,
            out_dir: None,
            format: OutputFormat::Csv,
            prime_sets: Vec::new(),
            prime_limit: None,
            x: Vec::new(),
            y: Vec::new(),
            n: Vec::new(),
            delta: Vec::new(),
            loglog_y: Vec::new(),
            lambda: Vec::new(),
            v: Vec::new(),
            k: Vec::new(),
            u: Vec::new(),
            c: Vec::new(),
            m: None,
            mu: None,
            epsilon: None,
            samples: None,
            filter: None,
            fixtures: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            LabError::Config(msg) => LabError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(DEFAULT_EPSILON)
    }

    pub fn samples(&self) -> u64 {
        self.samples.unwrap_or(DEFAULT_SAMPLES)
    }

    pub fn mu(&self) -> f64 {
        self.mu.unwrap_or(DEFAULT_MU)
    }

    pub fn prime_kinds(&self) -> Result<Vec<PrimeKind>> {
        self.prime_sets
            .iter()
            .enumerate()
            .map(|(i, s)| parse_prime_kind(s).map_err(|e| field_error(&format!("prime_sets[{i}]"), &e.to_string())))
            .collect()
    }

    /// Field-level checks for the selected experiment.
    pub fn validate(&self) -> Result<()> {
        self.prime_kinds()?;
        let nonempty = |name: &str, len: usize| {
            if len == 0 {
                Err(field_error(name, "grid is empty"))
            } else {
                Ok(())
            }
        };
        let positive = |name: &str, values: &[f64]| {
            match values.iter().position(|&x| !(x > 0.0) || !x.is_finite()) {
                Some(i) => Err(field_error(&format!("{name}[{i}]"), "must be positive and finite")),
                None => Ok(()),
            }
        };
        positive("x", &self.x)?;
        positive("y", &self.y)?;
        positive("lambda", &self.lambda)?;
        positive("v", &self.v)?;
        positive("loglog_y", &self.loglog_y)?;
        if let Some(i) = self.delta.iter().position(|&d| !(d > 0.0 && d <= 1.0)) {
            return Err(field_error(&format!("delta[{i}]"), "must lie in (0, 1]"));
        }
        if self.samples == Some(0) {
            return Err(field_error("samples", "must be at least 1"));
        }
        match self.experiment {
            Experiment::HqScan => {
                nonempty("prime_sets", self.prime_sets.len())?;
                nonempty("x", self.x.len())?;
                nonempty("y", self.y.len())?;
                for (i, &y) in self.y.iter().enumerate() {
                    if y <= std::f64::consts::E {
                        return Err(field_error(&format!("y[{i}]"), "must exceed e"));
                    }
                }
            }
            Experiment::AqDichotomy => {
                nonempty("prime_sets", self.prime_sets.len())?;
                nonempty("n", self.n.len())?;
                if let Some(i) = self.n.iter().position(|&n| n == 0 || n > 100_000) {
                    return Err(field_error(&format!("n[{i}]"), "must lie in [1, 100000]"));
                }
            }
            Experiment::PoissonPhase => {
                let sweep = !self.lambda.is_empty() || !self.v.is_empty();
                let phase = !self.delta.is_empty() || !self.loglog_y.is_empty();
                if !sweep && !phase {
                    return Err(field_error("lambda", "grid is empty (set lambda and v, or delta and loglog_y)"));
                }
                if sweep {
                    nonempty("lambda", self.lambda.len())?;
                    nonempty("v", self.v.len())?;
                    if let Some(i) = self.v.iter().position(|&v| v.fract() != 0.0) {
                        return Err(field_error(&format!("v[{i}]"), "must be an integer"));
                    }
                }
                if phase {
                    nonempty("delta", self.delta.len())?;
                    nonempty("loglog_y", self.loglog_y.len())?;
                }
                let eps = self.epsilon();
                if !(eps > 0.0 && eps < 1.0) {
                    return Err(field_error("epsilon", "must lie in (0, 1)"));
                }
            }
            Experiment::Smirnov => {
                nonempty("k", self.k.len())?;
                nonempty("v", self.v.len())?;
                if self.k.contains(&0) {
                    return Err(field_error("k", "entries must be at least 1"));
                }
                let mu = self.mu();
                if !(mu > 0.0 && mu < 0.5) {
                    return Err(field_error("mu", "must lie in (0, 1/2)"));
                }
            }
            Experiment::Verify => {}
        }
        Ok(())
    }
}

fn field_error(field: &str, msg: &str) -> LabError {
    LabError::Config(format!("field `{field}`: {msg}"))
}

/// Parses `all`, `congruence:<m>:<r1>+<r2>…`, or `thinned:<density>:<seed>`.
pub fn parse_prime_kind(text: &str) -> Result<PrimeKind> {
    let parts: Vec<&str> = text.trim().split(':').collect();
    let bad = || LabError::Config(format!("unrecognized prime set `{text}`"));
    match parts.as_slice() {
        ["all"] => Ok(PrimeKind::All),
        ["congruence", m, rs] => {
            let modulus = m.parse().map_err(|_| bad())?;
            let residues = rs
                .split('+')
                .map(|r| r.parse().map_err(|_| bad()))
                .collect::<Result<Vec<u64>>>()?;
            Ok(PrimeKind::Congruence { modulus, residues })
        }
        ["thinned", d, s] => Ok(PrimeKind::Thinned {
            density: d.parse().map_err(|_| bad())?,
            seed: s.parse().map_err(|_| bad())?,
        }),
        _ => Err(bad()),
    }
}
