use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("lattice matrix is singular (|det| = {det:e})")]
    SingularMatrix { det: f64 },
    #[error("lattice matrix must be square with even dimension, got {rows}x{cols}")]
    BadShape { rows: usize, cols: usize },
    #[error("translation {shift} is not a multiple of the grid spacing {spacing}")]
    MisalignedShift { shift: f64, spacing: f64 },
    #[error("window does not decay inside the quadrature box (boundary/peak = {ratio:e})")]
    SupportTruncation { ratio: f64 },
    #[error("window is identically zero")]
    DegenerateWindow,
    #[error("periodization shells grow: shell {shell} max {last:e} exceeds previous {prev:e}")]
    NonDecaying { shell: usize, last: f64, prev: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("frequency {omega} exceeds the Nyquist limit {nyquist} of the quadrature grid")]
    Aliasing { omega: f64, nyquist: f64 },
    #[error("symbol has zero mean")]
    ZeroMean,
    #[error("inner product (gamma, g) must be positive, got {0:e}")]
    NonPositiveInner(f64),
    #[error("sampled window has no exact derivatives; rigorous constants unavailable")]
    MissingDerivatives,
    #[error("inner product (gamma, g) vanishes")]
    ZeroInner,
    #[error("certificate premise fails: {lhs:e} is not below {rhs:e}")]
    ConditionFailed { lhs: f64, rhs: f64 },
    #[error("empty interval [{a}, {b}]")]
    EmptyInterval { a: f64, b: f64 },
    #[error("truncated sum not converged: last shell {ratio:e} of output norm")]
    TruncationWarning { ratio: f64 },
    #[error("grid of {size} points too large for dense assembly (limit {limit})")]
    GridTooLarge { size: usize, limit: usize },
    #[error("{what} did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("method unavailable: {0}")]
    MethodUnavailable(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
