use thiserror::Error;

use crate::aft::HarmonicVector;

/// Errors raised by the solver library.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value at sample {index}")]
    NonFiniteSample { index: usize },

    #[error("non-finite input: {0}")]
    NonFiniteInput(String),

    #[error("no convergence after {iterations} iterations (residual norm {residual_norm:.3e})")]
    NonConvergence {
        iterations: usize,
        residual_norm: f64,
        best: Box<HarmonicVector>,
    },

    #[error("singular Jacobian")]
    SingularJacobian,

    #[error("phase undefined for a zero-magnitude component")]
    UndefinedPhase,

    #[error("broadband excitation of harmonic {harmonic} vanishes; no trackable superharmonic at this state")]
    VanishingBroadband { harmonic: usize },

    #[error("failed to seed branch: {0}")]
    SeedFailure(String),

    #[error("{0}")]
    OutOfRange(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("empty overlap: {0}")]
    EmptyOverlap(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
