use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
#[non_exhaustive]
pub enum Error {
    /// A parameter inequality does not hold; the payload names it.
    #[error("parameter violation: {0} does not hold")]
    ParamViolation(&'static str),

    #[error("non-finite value at coordinate {0}")]
    NonFinite(usize),

    #[error("coordinate {index} out of range: |{value}| > A = {bound}")]
    OutOfRange { index: usize, value: f64, bound: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("too few workers: need at least {needed}, got {got}")]
    TooFewWorkers { needed: usize, got: usize },

    /// A tradeoff curve segment of positive width has slope zero.
    #[error("degenerate curve: zero slope on [{from}, {to}]")]
    DegenerateCurve { from: f64, to: f64 },

    #[error("invalid tradeoff curve: {0}")]
    InvalidCurve(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The effective step `η/B − Lη²/(2B²)` is not positive.
    #[error("degenerate step size: effective step {0} is not positive")]
    DegenerateStep(f64),

    #[error("binomial coefficients overflow exact range for M = {0}")]
    Overflow(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// An internal cross-check failed. Indicates a bug, not bad input.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
