use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value at node ({i}, {j})")]
    NonFinite { i: usize, j: usize },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("density support reaches the outer two node layers at node ({i}, {j})")]
    SupportViolation { i: usize, j: usize },

    #[error("radius not found: {0}")]
    RadiusNotFound(String),

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("iterates decreased by {violation:e} at node ({i}, {j}); try a shift of at least {suggested:e}")]
    ShiftTooSmall {
        i: usize,
        j: usize,
        violation: f64,
        suggested: f64,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("field is not spherically symmetric: deviation {0:.3e}")]
    NotSpherical(f64),

    #[error("line search failed after {iterations} iterations")]
    Stagnation {
        iterations: usize,
        report: Box<crate::variational::VariationalReport>,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
