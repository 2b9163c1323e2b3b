use thiserror::Error;

/// Errors reported by the vortex laboratory.
#[derive(Debug, Error)]
pub enum VortexError {
    /// Caller supplied arguments outside the documented domain.
    #[error("usage error: {0}")]
    Usage(String),

    /// An iterative solver stopped without meeting its tolerance.
    #[error("{solver} failed to converge: {detail}")]
    SolverFailure { solver: &'static str, detail: String },

    /// A numerical invariant was violated (indefinite Gram matrix, singular system, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed artifact: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl VortexError {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        VortexError::Usage(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        VortexError::Numerical(msg.into())
    }

    /// True when the error stems from bad input rather than from the numerics.
    pub fn is_usage(&self) -> bool {
        matches!(self, VortexError::Usage(_) | VortexError::Format(_))
    }
}

pub type Result<T> = std::result::Result<T, VortexError>;
