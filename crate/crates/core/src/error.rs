use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the raster, evaluation and probing operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    /// A precondition of the operation was violated by its input.
    #[error("contract violation: {0}")]
    Contract(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable name of the error category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Format(_) => "format",
            Error::Unsupported(_) => "unsupported",
            Error::InvalidInput(_) => "invalid_input",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::Contract(_) => "contract",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
