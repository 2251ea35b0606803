//! Command-line front end for the spin-phase solvers: configuration loading,
//! the `field`, `evolve` and `sweep` commands, and output writers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod ini;
pub mod output;

use std::path::PathBuf;

pub use commands::{cmd_evolve, cmd_field, cmd_sweep, RunOptions};
pub use config::ConfigError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),

    /// A configuration that parsed but describes an invalid problem.
    #[error("invalid scenario: {0}")]
    Invalid(String),

    #[error(transparent)]
    Numerical(#[from] spinphase_core::Error),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Invalid(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Numerical(_) | CliError::Io { .. } => 1,
        }
    }
}
