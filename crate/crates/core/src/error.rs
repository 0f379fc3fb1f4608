use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not unitary (max deviation {deviation:e})")]
    NotUnitary { deviation: f64 },

    /// An unphysical branch: `V_B + I` is singular or not positive definite.
    #[error("numerical domain error: {0}")]
    NumericalDomain(String),

    /// Accumulated cancellation pushed a probability outside `[0, 1]`.
    #[error("precision failure: probability {value} outside [0, 1] at mode {mode}")]
    Precision { mode: usize, value: f64 },

    /// Mixture coefficients no longer sum to 1 within `TAU_DRIFT`; the
    /// branch weights have grown past what double precision resolves.
    #[error("precision failure: coefficient sum off by {drift:e} after measuring mode {mode}")]
    NormalizationDrift { mode: usize, drift: f64 },

    #[error("impossible outcome at mode {mode}: outcome probability {prob:e}")]
    ImpossibleOutcome { mode: usize, prob: f64 },

    #[error("limit exceeded: {what} = {value} > {limit}")]
    LimitExceeded {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Precision failures, as opposed to invalid input or I/O.
    pub fn is_precision(&self) -> bool {
        matches!(self, Error::Precision { .. } | Error::NormalizationDrift { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
