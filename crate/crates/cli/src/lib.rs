//! Config-driven experiment runner for the `mcusum` detectors.
//!
//! Every subcommand reads one TOML file, validates it completely, and writes
//! CSV files under `output.dir`. Floats are printed with six significant
//! digits and all estimates are independent of the worker count, so reruns
//! produce byte-identical files.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

pub use config::{ExperimentConfig, Overrides};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Validation(String),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Table1,
    Figures,
    Calibrate,
    Constants,
    Sweep,
}

/// Loads, overrides, validates and runs; returns the files written.
pub fn run(
    command: Command,
    config: &mut ExperimentConfig,
    overrides: &Overrides,
    workers: usize,
) -> Result<Vec<PathBuf>, CliError> {
    config.apply(overrides);
    let model = config.validate()?;
    let cx = commands::Context { config, model: model.as_ref(), workers };
    match command {
        Command::Table1 => commands::table1(&cx),
        Command::Figures => commands::figures(&cx),
        Command::Calibrate => commands::calibrate(&cx),
        Command::Constants => commands::constants(&cx),
        Command::Sweep => commands::sweep(&cx),
    }
}
