use thiserror::Error;

/// Errors produced by the recovery pipeline, the generators and the I/O layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("column {0} has (numerically) zero norm")]
    ZeroColumn(usize),

    #[error("matrix is rank deficient (condition estimate {0:e})")]
    RankDeficient(f64),

    #[error("regularization weight {lambda:e} is not small against the smallest eigenvalue {min_eig:e} of the Gram matrix")]
    RegularizationTooLarge { lambda: f64, min_eig: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("least-squares submatrix on the requested support is rank deficient")]
    SingularSubmatrix,

    #[error("support is empty")]
    EmptySupport,

    #[error("problem too large for exhaustive enumeration: n = {n} exceeds {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("no stable autoregressive draw after {0} retries")]
    UnstableSystem(usize),

    #[error("perturbation energy is zero, SNR is infinite")]
    InfiniteSnr,

    #[error("LP is infeasible")]
    Infeasible,

    #[error("solver did not converge within {0} iterations")]
    MaxIterations(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
