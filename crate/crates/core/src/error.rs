use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two operands whose shapes cannot be combined by `op`.
    #[error("{op}: dimension mismatch between {left:?} and {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("{op}: invalid shape {shape:?}: {reason}")]
    Shape {
        op: &'static str,
        shape: Vec<usize>,
        reason: String,
    },

    /// A class index or token id outside `[0, bound)`.
    #[error("label {index} at position {position} is out of range for {bound} classes")]
    Label {
        index: usize,
        position: usize,
        bound: usize,
    },

    #[error("{op}: non-finite value produced")]
    NonFinite { op: &'static str },

    #[error("non-finite training loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("unknown genre {0:?}")]
    UnknownGenre(String),

    /// Batch of problems found while ingesting a manifest or alias table.
    #[error("{} invalid record(s):\n  {}", .0.len(), .0.join("\n  "))]
    Manifest(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("incompatible artifacts: {0}")]
    Compatibility(String),

    /// Missing or contradictory command inputs.
    #[error("usage: {0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn dim(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Dimension {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }
}
