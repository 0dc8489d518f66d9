//! Batch pipelines behind the `mlss` binary.

pub mod align;
pub mod analyze;
pub mod backtest;
pub mod config;
pub mod estimate;
pub mod report;
pub mod synth;

use std::path::{Path, PathBuf};

pub use config::PipelineConfig;
pub use report::{Run, RunReport};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] mlss_core::Error),
    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    /// 2 for bad configuration or inputs, 3 for numerical failures, 1 when
    /// outputs cannot be written.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(mlss_core::Error::Io(_)) => 1,
            CliError::Core(_) => 2,
            CliError::Output(_) => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Synth,
    Estimate,
    Analyze,
    Backtest,
    Mc,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Estimate => "estimate",
            Command::Analyze => "analyze",
            Command::Backtest => "backtest",
            Command::Mc => "mc",
        }
    }
}

/// Loads (or defaults) the config, applies `--seed` and resolves paths
/// against `out`, then runs `cmd` and writes its report.
pub fn execute(cmd: Command, config: Option<&Path>, out: &Path, seed: Option<u64>) -> CliResult<RunReport> {
    let mut cfg = match config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    std::fs::create_dir_all(out)?;
    let out: PathBuf = out.canonicalize()?;
    cfg.resolve(&out, seed);
    let mut run = Run::new(cmd.name(), &cfg, &out);
    let result = match cmd {
        Command::Synth => synth::run(&cfg, &mut run),
        Command::Estimate => estimate::run(&cfg, &mut run),
        Command::Analyze => analyze::run(&cfg, &mut run),
        Command::Backtest => backtest::run(&cfg, &mut run),
        Command::Mc => backtest::run_mc(&cfg, &mut run),
    };
    match result {
        Ok(()) => run.finish(),
        Err(e) => {
            run.fail(&e);
            Err(e)
        }
    }
}
