use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared by the numerical kernels, the iteration engine and
/// the application solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no bracket: g({lo}) = {g_lo} and g({hi}) = {g_hi} have the same sign")]
    NoBracket { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },

    #[error("invalid function value at {at}")]
    InvalidFunctionValue { at: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("negative threshold {value} at index {index}")]
    NegativeThreshold { index: usize, value: f64 },

    #[error("matrix is not Hermitian (deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("subproblem infeasible: {0}")]
    SubproblemInfeasible(String),

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("not a descent direction (directional derivative {slope:e})")]
    NotDescentDirection { slope: f64 },

    #[error("line search stalled after {steps} backtracking steps")]
    LineSearchStalled { steps: u32 },

    #[error("degenerate column {column}: zero diagonal element of A^T A")]
    DegenerateColumn { column: usize },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("basis pursuit not converged after {iterations} outer iterations (residual {residual:e})")]
    BpNotConverged { iterations: usize, residual: f64 },

    #[error("bisection bracket failure: {0}")]
    BracketFailure(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
