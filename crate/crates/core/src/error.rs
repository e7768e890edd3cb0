use thiserror::Error;

/// Errors produced by the solvers, samplers and validators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("hypothesis validation failed in `{check}`: {witness}")]
    ValidationFailed { check: String, witness: String },

    #[error("numerical blow-up at step {step}")]
    BlowUp { step: usize },

    #[error("control has a nonzero component in mode {mode}, outside the range of the noise")]
    UnsupportedControl { mode: usize },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
