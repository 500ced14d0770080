use thiserror::Error;

use crate::copula::CopulaError;
use crate::data::DataError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),

    #[error(transparent)]
    Copula(#[from] CopulaError),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("censoring time must be positive, got {0}")]
    NonPositiveCensoringTime(f64),

    #[error("kernel regression failed at {point:?}: {reason}")]
    Kernel { point: Vec<f64>, reason: String },

    #[error("non-finite psi at y={y}, z={z}, x={x:?}")]
    NonFinitePsi { y: f64, z: bool, x: Vec<f64> },

    #[error("zero risk-set denominator at event time {time}")]
    ZeroDenominator { time: f64 },

    #[error("hazard increment {increment} at time {time} exceeds the cap")]
    IncrementCap { time: f64, increment: f64 },

    #[error("no uncensored events to estimate the baseline hazard")]
    NoEvents,

    #[error("non-finite log-likelihood contribution for observation {index}")]
    NonFiniteContribution { index: usize },

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
