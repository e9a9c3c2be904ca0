use std::path::PathBuf;

use crate::params::Params;

#[derive(Debug, thiserror::Error)]
pub enum TsfmError {
    #[error(transparent)]
    Core(#[from] hybridcast_core::Error),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("non-finite {what} in {location}")]
    NonFinite {
        what: &'static str,
        location: String,
    },
    #[error("training diverged at step {step}: {reason}")]
    Diverged {
        step: usize,
        reason: String,
        /// Parameters before the failing step.
        checkpoint: Box<Params>,
    },
    #[error("unsupported model format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("array `{name}`: {reason}")]
    Shape { name: String, reason: String },
    #[error("model file {path}: {message}")]
    Format { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, TsfmError>;

impl From<TsfmError> for hybridcast_core::Error {
    fn from(e: TsfmError) -> Self {
        match e {
            TsfmError::Core(inner) => inner,
            other => hybridcast_core::Error::Numeric(other.to_string()),
        }
    }
}
