//! Error type shared by every module.

use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum PcsError {
    #[error("invalid truncation: {0}")]
    InvalidTruncation(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("numerical singularity: {0}")]
    NumericalSingularity(String),

    #[error("degenerate null space: {0}")]
    Degenerate(String),

    #[error("time integration failed: {0}")]
    IntegrationFailure(String),

    #[error("quadrature did not converge (residual estimate {residual:e})")]
    QuadratureNonConvergence { residual: f64 },

    #[error("truncations did not converge: {0}")]
    NoConvergence(String),

    #[error("empty support: {0}")]
    EmptySupport(String),

    #[error("ill-conditioned ratio: background {background:e} is below threshold")]
    IllConditionedRatio { background: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("eigendecomposition failed: {0}")]
    EigenFailure(String),
}

pub type Result<T> = std::result::Result<T, PcsError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> PcsError {
    PcsError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
