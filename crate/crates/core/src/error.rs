use thiserror::Error;

/// Errors raised by the bound, divergence and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty sample request")]
    EmptySampleRequest,

    #[error("sample-mean law implemented for ≤2 components")]
    TooManyComponents,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("degenerate partition: {distinct} distinct values for {cells} cells")]
    DegeneratePartition { distinct: usize, cells: usize },

    #[error("quadrature failed (estimate {value}, error estimate {abs_err:e})")]
    QuadratureFailed { value: f64, abs_err: f64 },

    #[error("degenerate curvature")]
    DegenerateCurvature,

    #[error("insufficient trials: {0} < 100")]
    InsufficientTrials(usize),

    #[error("too many estimator failures: {failed} of {trials} trials")]
    TooManyFailures { failed: usize, trials: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
