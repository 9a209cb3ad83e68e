use thiserror::Error;

use crate::kernel::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("pair ({i}, {j}) is not an independent entry of an {n}x{n} kernel")]
    InvalidPair { i: usize, j: usize, n: usize },

    #[error("entry ({i}, {j}) has no measurements")]
    NoData { i: usize, j: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("ledger incomplete: {} pairs have no shots (first: {:?})", missing.len(), missing.first())]
    IncompleteLedger { missing: Vec<(usize, usize)> },

    #[error("degenerate SVM problem: {0}")]
    DegenerateProblem(String),

    #[error("SMO did not converge in {iterations} iterations (worst KKT violation {violation:e})")]
    Convergence { iterations: usize, violation: f64 },

    #[error("budget {budget} is smaller than the {pairs} independent entries")]
    InsufficientBudget { budget: u64, pairs: usize },

    #[error("all allocation weights are zero")]
    DegenerateWeights,

    #[error("all allocation scores are zero")]
    DegenerateScores,

    #[error("entry ({i}, {j}) has positive weight but no shots")]
    InfiniteVariance { i: usize, j: usize },

    #[error("perturbation violates the budget or positivity constraint: {0}")]
    ConstraintViolation(String),

    #[error("problem too large for exhaustive search: n = {n} (max {max})")]
    TooLarge { n: usize, max: usize },

    #[error("dataset too small: {0} points (need at least 4)")]
    TooSmall(usize),

    #[error("empty index subset")]
    EmptySubset,

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid kernel: {0}")]
    InvalidKernel(ValidationReport),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
