//! Batch front end: parse a job file, locate the attractor, check the
//! hypotheses and run one job.
//!
//! Exit codes: 0 success, 1 configuration or other error, 2 hypothesis
//! failure, 3 attractor location failure, 4 divergence. Failures also print
//! one tab-separated `kf-error` line on standard error.

pub mod analyze;
pub mod config;
mod format;
pub mod jobs;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use config::{ConfigError, JobConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Hypothesis(String),
    #[error("{0}")]
    Attractor(String),
    #[error("{0}")]
    Divergence(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) | CliError::Numerical(_) => 1,
            CliError::Hypothesis(_) => 2,
            CliError::Attractor(_) => 3,
            CliError::Divergence(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Numerical(_) => "numerical",
            CliError::Hypothesis(_) => "hypothesis",
            CliError::Attractor(_) => "attractor",
            CliError::Divergence(_) => "divergence",
        }
    }

    /// `kf-error<TAB>code=N<TAB>kind=K<TAB>message=...` on one line.
    pub fn machine_line(&self) -> String {
        let msg = self.to_string().replace(['\n', '\t'], " ");
        format!("kf-error\tcode={}\tkind={}\tmessage={}", self.exit_code(), self.kind(), msg)
    }
}

pub(crate) fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Locate the attractor and report spectrum, spread and nonresonance.
    Analyze,
    /// Solve for the polynomial factor of order k.
    Linearize,
    /// Evaluate the eigenfunction limit on the configured grid.
    Eigenfunction,
    /// Phase and isostable coordinates of a limit cycle.
    Cycle,
    /// List the monomial eigenfunctions for a target exponent.
    Classify,
}

#[derive(Debug, Parser)]
#[command(name = "kf", version, about = "Linearizing factors and Koopman eigenfunctions of attractors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Job configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `[output] dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Continue past failed hypotheses with a warning.
    #[arg(long, global = true)]
    pub force: bool,
    /// Worker threads for grid evaluation.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for sampled diagnostics.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

/// Options shared by every job.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub force: bool,
    pub seed: u64,
}

/// What a job produced.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

pub fn run(command: Command, cfg: &JobConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    match command {
        Command::Analyze => jobs::analyze(cfg, opts),
        Command::Linearize => jobs::linearize(cfg, opts),
        Command::Eigenfunction => jobs::eigenfunction(cfg, opts),
        Command::Cycle => jobs::cycle(cfg, opts),
        Command::Classify => jobs::classify(cfg, opts),
    }
}

pub fn load_config(path: &Path) -> Result<JobConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    Ok(JobConfig::parse(&text)?)
}

/// Parsed command line to finished job; `main` only maps the error to an
/// exit code.
pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config(ConfigError {
                line: 0,
                message: "--threads must be at least 1".into(),
            }));
        }
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::warn!("thread pool already initialised; --threads ignored");
        }
    }
    let path = cli.config.as_ref().ok_or_else(|| {
        CliError::Config(ConfigError {
            line: 0,
            message: "--config PATH is required".into(),
        })
    })?;
    let cfg = load_config(path)?;
    let opts = RunOptions {
        out: cli.out.clone(),
        force: cli.force,
        seed: cli.seed,
    };
    run(cli.command, &cfg, &opts)
}
