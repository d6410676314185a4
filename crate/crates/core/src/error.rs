//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by ingestion, decomposition, forecasting, scoring and
/// portfolio optimization.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("duplicate reading for household {household} at {timestamp}: {first} and {second}")]
    DuplicateReading {
        household: String,
        timestamp: String,
        first: String,
        second: String,
    },

    #[error("timestamps for household {household} are not increasing ({previous} then {next})")]
    NonMonotoneTimestamps {
        household: String,
        previous: String,
        next: String,
    },

    #[error("household {0} has no observed values")]
    AllMissing(String),

    #[error("series too short: need at least {required} points, got {actual}")]
    TooShort { required: usize, actual: usize },

    #[error("stride {0} is not prime")]
    NotPrime(usize),

    #[error("degenerate series: {0}")]
    Degenerate(String),

    #[error("optimizer failed to converge: {0}")]
    NoConvergence(String),

    #[error("no model could be fitted: {0}")]
    FitFailed(String),

    #[error("no feasible portfolio found; best candidate violates bounds by {violation} (objective {objective})")]
    Infeasible { violation: f64, objective: f64 },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
