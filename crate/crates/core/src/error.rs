use thiserror::Error;

/// Errors shared by every module of the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("fields live on different domains")]
    DomainMismatch,

    #[error("grid data has length {got}, domain expects {expected}")]
    ShapeMismatch { got: usize, expected: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("field must have zero mean (coefficient k=0 is {0:e})")]
    NonzeroMean(f64),

    #[error("field is identically zero")]
    ZeroField,

    #[error("time series is not usable for fitting: {0}")]
    BadSeries(String),

    #[error("exponent pair (p={p}, q={q}) violates the hypothesis of {bound}: {reason}")]
    HypothesisViolation {
        bound: &'static str,
        p: f64,
        q: f64,
        reason: String,
    },

    #[error("configuration error: {0}")]
    Config(String),
}
