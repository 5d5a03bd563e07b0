use std::io;

use thiserror::Error;

/// Errors raised by games, environments and the analysis toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("degenerate distribution: weights must be finite, non-negative and not all zero")]
    DegenerateDistribution,

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("loss value {0} lies outside [-1, 1]")]
    LossOutOfRange(f64),

    #[error("too many distinct binary rows: {requested} requested but only 2^{rounds} exist")]
    TooManyDistinctRows { requested: usize, rounds: usize },

    #[error("expert {index} out of range for {count} experts")]
    ExpertOutOfRange { index: usize, count: usize },

    #[error("environment has an unbounded expert set; a finite one is required here")]
    UnboundedExperts,

    #[error("malformed matrix data: {0}")]
    Format(String),

    #[error("covering/packing duality violated at epsilon {epsilon}: P(2e)={packing_2eps} N(e)={cover} P(e)={packing_eps}")]
    DualityViolation {
        epsilon: f64,
        packing_2eps: usize,
        cover: usize,
        packing_eps: usize,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        name,
        reason: reason.into(),
    }
}
