//! Experiment runner for `skwave`: configuration files, the experiment drivers
//! and reproducible CSV output.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod norms;
pub mod output;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("hypothesis check failed: {0}")]
    HypothesisFailed(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error(transparent)]
    Core(#[from] skwave::Error),
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl LabError {
    /// Process exit status: 1 usage or input, 2 hypothesis failure, 3 blow-up.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::HypothesisFailed(_) | Self::Core(skwave::Error::ValidationFailed { .. }) => 2,
            Self::Core(skwave::Error::BlowUp { .. }) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
