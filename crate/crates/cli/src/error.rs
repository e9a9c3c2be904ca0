use std::path::PathBuf;

use hybridcast_core::Error as CoreError;
use hybridcast_tsfm::TsfmError;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Failures grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, configuration or arguments (exit 1).
    #[error("{0}")]
    Usage(String),
    /// Missing, unreadable or malformed input (exit 2).
    #[error("{0}")]
    Data(String),
    /// Non-finite values or divergence (exit 3).
    #[error("{message}{}", checkpoint.as_ref().map(|p| format!(" (checkpoint written to {})", p.display())).unwrap_or_default())]
    Numeric {
        message: String,
        checkpoint: Option<PathBuf>,
    },
    #[error("stage `{stage}` failed: {source}{}", completed_note(completed))]
    Stage {
        stage: String,
        completed: Vec<PathBuf>,
        source: Box<CliError>,
    },
}

fn completed_note(paths: &[PathBuf]) -> String {
    if paths.is_empty() {
        return String::new();
    }
    let list: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
    format!("\ncompleted artifacts:\n  {}", list.join("\n  "))
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric { .. } => 3,
            CliError::Stage { source, .. } => source.exit_code(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        CliError::Numeric {
            message: message.into(),
            checkpoint: None,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidArgument(_) | CoreError::NoConfidence(_) => {
                CliError::Usage(e.to_string())
            }
            CoreError::Numeric(_) => CliError::numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<TsfmError> for CliError {
    fn from(e: TsfmError) -> Self {
        match e {
            TsfmError::Core(inner) => inner.into(),
            TsfmError::Config(_) => CliError::Usage(e.to_string()),
            TsfmError::NonFinite { .. } | TsfmError::Diverged { .. } => {
                CliError::numeric(e.to_string())
            }
            TsfmError::Version { .. } | TsfmError::Shape { .. } | TsfmError::Format { .. } => {
                CliError::Data(e.to_string())
            }
        }
    }
}
