use std::fmt;

/// Errors raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid exponent {0}: expected a value in (1, inf)")]
    InvalidExponent(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("penalty is infinite at the target point")]
    InfeasibleTarget,

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("{solver} did not converge: residual {residual:.3e} after {iterations} iterations (tolerance {tolerance:.1e})")]
    ConvergenceFailure {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("invalid batch size {batch} for {equations} equations")]
    InvalidBatch { batch: usize, equations: usize },

    #[error("row range {start}..{end} out of bounds for {rows} rows")]
    RowRange { start: usize, end: usize, rows: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl fmt::Display) -> Self {
        Error::InvalidParameter(msg.to_string())
    }

    pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, found })
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
