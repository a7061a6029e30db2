//! Command-line runner for characterization experiments.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod output;

use config::{BackendName, ConfigError, ConfigLayer, ExperimentConfig, ScenarioName};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("golden table mismatch: {0}")]
    GoldenMismatch(String),
    #[error("self-test failed: {0} check(s)")]
    SelfTest(usize),
    #[error(transparent)]
    Core(#[from] dcqd_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Core(dcqd_core::Error::InvalidParameter { .. }) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dcqd", version, about = "Direct characterization of a qubit channel with a filtered noisy ancilla")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print and check the located-error syndrome table.
    Table(ConfigArgs),
    /// Reconstruct the process matrix for one scenario.
    Characterize(ConfigArgs),
    /// Failure rate of the filter against ancilla depolarizing strength.
    FailureSweep(ConfigArgs),
    /// Fast invariant checks.
    Selftest,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML file with any ExperimentConfig fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Shots per preprocessing setting.
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendName>,
    #[arg(long, value_enum)]
    pub scenario: Option<ScenarioName>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub filter: Option<bool>,
    /// Comma-separated depolarizing strengths for the sweep.
    #[arg(long, value_delimiter = ',')]
    pub p_grid: Option<Vec<f64>>,
}

impl ConfigArgs {
    pub fn resolve(&self, scenario: Option<ScenarioName>) -> Result<ExperimentConfig, ConfigError> {
        let flags = ConfigLayer {
            scenario: self.scenario.or(scenario),
            gamma: self.gamma,
            p: self.p,
            shots_per_setting: self.shots,
            seed: self.seed,
            backend: self.backend,
            output_dir: self.out.clone(),
            filter: self.filter,
            p_grid: self.p_grid.clone(),
        };
        ExperimentConfig::resolve(self.config.as_deref(), flags)
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Table(args) => commands::cmd_table(&args.resolve(Some(ScenarioName::Table))?).map(drop),
        Command::Characterize(args) => commands::cmd_characterize(&args.resolve(None)?).map(drop),
        Command::FailureSweep(args) => {
            commands::cmd_failure_sweep(&args.resolve(Some(ScenarioName::FailureSweep))?).map(drop)
        }
        Command::Selftest => commands::cmd_selftest().map(drop),
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
