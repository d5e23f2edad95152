//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by tensor ops, the network, data preparation and file I/O.
///
/// Display output is a single line so CLI consumers can emit machine-parsable
/// diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or map extents do not satisfy a shape contract.
    #[error("shape error: {0}")]
    Shape(String),

    /// An argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    Invalid(String),

    /// A polygon failed validation (too few vertices, self-intersection).
    #[error("degenerate polygon: {0}")]
    Polygon(String),

    /// Training diverged or hit an unusable batch.
    #[error("training aborted: {0}")]
    Training(String),

    /// A serialized artifact is malformed.
    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn format(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
