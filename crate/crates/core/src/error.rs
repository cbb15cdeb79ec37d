use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Stable error classes. The CLI maps these onto exit codes and prints
/// [`Error::class`] as a machine-readable prefix.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported dtype '{0}'")]
    UnsupportedDtype(String),

    #[error("schema error: missing key '{0}'")]
    Schema(String),

    #[error("lifecycle error: {0}")]
    Lifecycle(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("operation '{0}' has no backward rule")]
    UnsupportedOp(String),

    #[error("{kind} '{name}' not found (available: {available})")]
    NotFound {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("fetch error (retryable): {0}")]
    Fetch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl fmt::Display) -> Self {
        Error::Dimension {
            op,
            detail: detail.to_string(),
        }
    }

    /// Short stable tag for the error class.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::Validation(_) => "validation",
            Error::Config(_) => "config",
            Error::Degenerate(_) => "degenerate",
            Error::Format(_) => "format",
            Error::UnsupportedDtype(_) => "unsupported-dtype",
            Error::Schema(_) => "schema",
            Error::Lifecycle(_) => "lifecycle",
            Error::Contract(_) => "contract",
            Error::UnsupportedOp(_) => "unsupported-op",
            Error::NotFound { .. } => "not-found",
            Error::Divergence { .. } => "divergence",
            Error::Integrity(_) => "integrity",
            Error::Fetch(_) => "fetch",
            Error::Io(_) => "io",
        }
    }
}
