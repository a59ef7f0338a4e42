use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum StcnError {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("format error: {message} (field `{field}` at byte offset {offset})")]
    Format {
        field: &'static str,
        offset: u64,
        message: String,
    },

    #[error("checkpoint error for parameter `{param}`: {message}")]
    Checkpoint { param: String, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("training diverged at step {step}: {detail}")]
    Divergence { step: usize, detail: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = StcnError> = std::result::Result<T, E>;

pub(crate) fn shape_err(msg: impl Into<String>) -> StcnError {
    StcnError::Shape(msg.into())
}
