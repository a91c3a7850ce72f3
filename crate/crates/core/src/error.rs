//! Error type shared by every module of the crate.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Newton iteration hit its cap before the residual dropped below tolerance.
    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("singular jacobian in newton step")]
    SingularJacobian,

    #[error("singular matrix (pivot {pivot:e} below threshold {threshold:e})")]
    SingularMatrix { pivot: f64, threshold: f64 },

    /// Two particles came closer than the allowed gap. `s` is set when the
    /// collision happened part way along an integrated path.
    #[error("collision singularity: gap {gap:e}{}", match .s { Some(s) => format!(" at s = {s}"), None => String::new() })]
    CollisionSingularity { gap: f64, s: Option<f64> },

    #[error("logarithm of zero argument ({what})")]
    LogSingularity { what: &'static str },

    #[error("degenerate direction: both components are zero")]
    DegenerateDirection,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Attach a path parameter to a collision error that does not have one yet.
    pub(crate) fn at_s(self, s: f64) -> Self {
        match self {
            Error::CollisionSingularity { gap, s: None } => Error::CollisionSingularity { gap, s: Some(s) },
            other => other,
        }
    }
}
