use num_complex::Complex64;
use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Circulant embedding with a period that cannot separate the stencil
    /// offsets from their wrap-around images.
    #[error(
        "period {period} too small for offset {offset:?} (axis {axis}): need period > 2*|offset| per axis"
    )]
    PeriodTooSmall {
        axis: usize,
        offset: Vec<i64>,
        period: usize,
    },

    #[error(
        "resolvent sI - A(sigma) is numerically singular at s = {s}, sigma = {sigma:?} (condition estimate {cond:.3e})"
    )]
    ResolventSingular {
        s: Complex64,
        sigma: Vec<f64>,
        cond: f64,
    },

    #[error("numerical failure in {what} at sigma = {sigma:?}")]
    NumericalFailure { what: &'static str, sigma: Vec<f64> },

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    /// The time-domain dissipation matrix is defined only for static
    /// (degree-0) supply operators.
    #[error("operation requires a static (degree-0) supply; got polynomial degree {degree}")]
    PolynomialSupplyUnsupported { degree: usize },

    #[error("state diverged (non-finite entries) at t = {time}")]
    Divergence { time: f64 },

    #[error("step size violation: {0}")]
    StepSize(String),

    #[error("model file {path}: {detail}")]
    ModelFile { path: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
