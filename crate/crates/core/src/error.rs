use thiserror::Error;

/// Errors raised by the estimators, fixtures and I/O layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("admissible level interval is empty: a_n = {a_n} but gap = {gap}")]
    GapTooSmall { a_n: f64, gap: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("kernel construction failed: {0}")]
    KernelConstruction(String),

    #[error("grid resolution too coarse: {0}")]
    Precision(String),

    #[error("grid of {cells} cells exceeds the limit of {limit}")]
    GridTooLarge { cells: u128, limit: u128 },

    #[error("invalid density parameters: {0}")]
    Parameter(String),

    #[error("rejection envelope too loose: acceptance rate {0:.3e}")]
    Envelope(f64),

    #[error("no cluster contains all requested indices")]
    NoContainingCluster,

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
