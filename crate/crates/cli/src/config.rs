//! Experiment configuration: defaults, TOML file and command-line layers.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use dcqd_core::{Backend, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    #[value(name = "clean")]
    Clean,
    #[value(name = "s0_noisy")]
    S0Noisy,
    #[value(name = "s1_noisy")]
    S1Noisy,
    #[value(name = "s1_clean")]
    S1Clean,
    #[value(name = "failure_sweep")]
    FailureSweep,
    #[value(name = "table")]
    Table,
}

impl ScenarioName {
    pub fn characterization(self) -> Option<Scenario> {
        match self {
            Self::Clean => Some(Scenario::Clean),
            Self::S0Noisy => Some(Scenario::S0Noisy),
            Self::S1Noisy => Some(Scenario::S1Noisy),
            Self::S1Clean => Some(Scenario::S1Clean),
            Self::FailureSweep | Self::Table => None,
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.to_possible_value().expect("no skipped variants").get_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendName {
    Sampling,
    Exact,
}

impl From<BackendName> for Backend {
    fn from(b: BackendName) -> Self {
        match b {
            BackendName::Sampling => Backend::Sampling,
            BackendName::Exact => Backend::Exact,
        }
    }
}

/// Fully resolved settings of one command invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: ScenarioName,
    pub gamma: f64,
    pub p: f64,
    pub shots_per_setting: u64,
    pub seed: u64,
    pub backend: BackendName,
    pub output_dir: PathBuf,
    pub filter: bool,
    pub p_grid: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioName::S1Noisy,
            gamma: 0.4,
            p: 0.1,
            shots_per_setting: 1_000_000,
            seed: 2024,
            backend: BackendName::Sampling,
            output_dir: PathBuf::from("results"),
            filter: true,
            p_grid: vec![0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3],
        }
    }
}

/// A partial configuration; later layers override earlier ones field by field.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub scenario: Option<ScenarioName>,
    pub gamma: Option<f64>,
    pub p: Option<f64>,
    pub shots_per_setting: Option<u64>,
    pub seed: Option<u64>,
    pub backend: Option<BackendName>,
    pub output_dir: Option<PathBuf>,
    pub filter: Option<bool>,
    pub p_grid: Option<Vec<f64>>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

impl ConfigLayer {
    pub fn from_toml_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.message().to_string(),
        })
    }

    fn apply(self, cfg: &mut ExperimentConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { cfg.$f = v; })* };
        }
        set!(scenario, gamma, p, shots_per_setting, seed, backend, output_dir, filter, p_grid);
    }
}

impl ExperimentConfig {
    /// Defaults, then the optional file, then `flags`.
    pub fn resolve(file: Option<&Path>, flags: ConfigLayer) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            ConfigLayer::from_toml_file(path)?.apply(&mut cfg);
        }
        flags.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let unit = |field, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(invalid(field, format!("{v} is outside [0, 1]")))
            }
        };
        unit("gamma", self.gamma)?;
        unit("p", self.p)?;
        if self.backend == BackendName::Sampling && self.shots_per_setting == 0 {
            return Err(invalid("shots_per_setting", "sampling needs at least one shot"));
        }
        if self.p_grid.is_empty() {
            return Err(invalid("p_grid", "needs at least one value"));
        }
        for &v in &self.p_grid {
            unit("p_grid", v)?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML form with `output_dir` blanked, in hex.
    pub fn hash(&self) -> String {
        let canonical = Self {
            output_dir: PathBuf::new(),
            ..self.clone()
        };
        Sha256::digest(canonical.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
