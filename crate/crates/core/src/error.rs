use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report.
///
/// Variants split into two families: problems with the caller's input
/// (parse, validation, configuration, dimensions) and problems that arise
/// while computing (numeric breakdown, I/O, checkpoint corruption).
/// [`SculptError::is_input_error`] tells them apart, which the command-line
/// driver maps onto exit codes.
#[derive(Debug, Error)]
pub enum SculptError {
    #[error("{file}: line {line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("gradient check aborted: {0}")]
    GradCheck(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, SculptError>;

impl SculptError {
    pub fn validation(msg: impl Into<String>) -> Self {
        SculptError::Validation(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        SculptError::Numeric(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        SculptError::Config(msg.into())
    }

    pub fn dimension(
        context: impl Into<String>,
        expected: impl std::fmt::Display,
        actual: impl std::fmt::Display,
    ) -> Self {
        SculptError::Dimension {
            context: context.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SculptError::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the error was caused by bad input rather than by a failure
    /// during computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            SculptError::Parse { .. }
                | SculptError::Validation(_)
                | SculptError::Dimension { .. }
                | SculptError::Config(_)
        )
    }
}
