use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SsboError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("matrix is not positive definite after jitter escalation")]
    NonPositiveDefinite,

    #[error("predictive variance {0} is negative beyond round-off")]
    NegativeVariance(f64),

    #[error("standard deviation must be strictly positive, got {0}")]
    NonPositiveStd(f64),

    #[error("mutation rate {0} outside (0, 0.75]")]
    RateOutOfRange(f64),

    #[error("family covers {family} points but domain has {domain}")]
    DomainMismatch { family: usize, domain: usize },

    #[error("point coordinate {value} outside [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, SsboError>;
