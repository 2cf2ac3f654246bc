//! Config loading, analysis commands and report rendering behind the
//! `codesign-lab` binary.

pub mod commands;
pub mod config;
pub mod report;

use thiserror::Error;

pub use commands::{run, Command};
pub use config::{AnalysisConfig, PresetResolver};
pub use report::{Cell, Report, Table};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("CONFIG_PARSE: {path}: {message}")]
    ConfigParse { path: String, message: String },
    #[error("CONFIG_INVALID: {field}: {reason}")]
    ConfigInvalid { field: String, reason: String },
    #[error("UNKNOWN_PRESET: {0}")]
    UnknownPreset(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    /// Process exit status: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigParse { .. } | CliError::ConfigInvalid { .. } | CliError::UnknownPreset(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}
