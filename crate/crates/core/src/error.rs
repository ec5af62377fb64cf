use thiserror::Error;

use crate::expr::{EvalError, ParseError};

/// Errors shared by every solver in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-integrable singularity near t = {at:e} (local power {power:.3})")]
    NonIntegrable { at: f64, power: f64 },

    #[error("maximum subdivision exceeded on [{a:e}, {b:e}] (error estimate {err:e})")]
    MaxSubdivision { a: f64, b: f64, err: f64 },

    #[error("integrand not positive at t = {t:e} (value {value:e})")]
    NonPositive { t: f64, value: f64 },

    #[error("no bracket for target {target:e} on [{lo:e}, {hi:e}] after expansion")]
    NoBracket { target: f64, lo: f64, hi: f64 },

    #[error("step size underflow at r = {r:e}")]
    StepUnderflow { r: f64 },

    #[error("monotonicity violated: {0}")]
    NonMonotone(String),

    #[error("extrapolation refused: {0}")]
    OutOfRange(String),

    #[error("{0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

