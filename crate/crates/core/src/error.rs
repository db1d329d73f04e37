use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{op}: shape mismatch, expected {expected}, got {found}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("negative activation {value} at region position {index}; pooling distributions require non-negative inputs")]
    NegativeActivation { index: usize, value: f64 },

    #[error(transparent)]
    Arch(#[from] ArchError),

    #[error("{path}: {msg}")]
    Format { path: String, msg: String },

    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}; training diverged")]
    Diverged { epoch: usize, batch: usize, loss: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, expected: impl fmt::Debug, found: impl fmt::Debug) -> Self {
        Error::ShapeMismatch {
            op,
            expected: format!("{expected:?}"),
            found: format!("{found:?}"),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

/// Architecture-string error, carrying the character position where parsing failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchError {
    pub position: usize,
    pub msg: String,
}

impl fmt::Display for ArchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "architecture error at position {}: {}", self.position, self.msg)
    }
}

impl std::error::Error for ArchError {}
