use thiserror::Error;

use crate::solvers::TraceRecord;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    /// No trial step passed the sufficient-decrease test. `tried` holds the
    /// `(alpha, f_trial)` pairs; `trace` the solver history up to the failure.
    #[error("line search failed at iteration {iteration} after {} trial steps", tried.len())]
    LineSearch {
        iteration: usize,
        tried: Vec<(f64, f64)>,
        trace: Vec<TraceRecord>,
    },

    #[error("infeasible spec: {0}")]
    InfeasibleSpec(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dims(expected: (usize, usize), got: (usize, usize)) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { expected, got })
    }
}
