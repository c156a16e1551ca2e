use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected:?}, got {got:?}")]
    Dimension {
        op: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("{op} requires a square matrix, got {rows}x{cols}")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },

    #[error("matrix equation is not solvable: {0}")]
    Solvability(String),

    #[error("sparse factorization failed: zero or negligible pivot at step {step} (row {row})")]
    SingularPivot { step: usize, row: usize },

    #[error("{what} did not converge within {iterations} iterations")]
    IterationLimit {
        what: &'static str,
        iterations: usize,
    },

    #[error("operator does not support {0}")]
    Capability(&'static str),

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} below -{threshold:e}")]
    NotPsd { eigenvalue: f64, threshold: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("size guard: {what} limited to n <= {limit}, got n = {n}")]
    SizeGuard {
        what: &'static str,
        limit: usize,
        n: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
