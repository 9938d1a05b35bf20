//! Plumbing shared by the `cranio` binary and its integration tests:
//! file IO for volumes, the on-disk dataset layout, model checkpoints,
//! config files, run manifests and report serialization.

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod io;
pub mod manifest;
pub mod report;

use thiserror::Error;

/// Command failures bucketed by exit code: 1 usage, 2 data, 3 pipeline.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Pipeline(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Pipeline(_) => 3,
        }
    }

    pub fn data(context: &str, err: impl std::fmt::Display) -> Self {
        CliError::Data(format!("{context}: {err}"))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<cranio_core::pipeline::PipelineError> for CliError {
    fn from(e: cranio_core::pipeline::PipelineError) -> Self {
        CliError::Pipeline(e.to_string())
    }
}
