//! Batch orchestration for the needle lower-bound toolkit: experiment
//! configs, the subcommands behind the `needlebound` binary, and the CSV and
//! JSON files they emit.
//!
//! Every command is a pure function from an [`ExperimentConfig`] (plus a
//! worker count that never changes the bytes) to a list of named output
//! files; [`output::write_files`] places them on disk.

#![forbid(unsafe_code)]

pub mod commands;
pub mod config;
pub mod output;

pub use config::ExperimentConfig;

use needlebound_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 for usage, config and parameter problems, 2 for certification
    /// failures, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Core(e) => match e {
                CoreError::Certification(_) => 2,
                CoreError::Accuracy(_) | CoreError::Numeric(_) => 3,
                CoreError::Parameter(_)
                | CoreError::Usage(_)
                | CoreError::Domain(_)
                | CoreError::Construction(_) => 1,
            },
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
