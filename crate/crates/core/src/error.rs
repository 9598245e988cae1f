use thiserror::Error;

/// Errors raised across the library. Each variant maps onto one failure
/// class that callers (and the CLI exit codes) distinguish.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid root system type/rank: {0}")]
    InvalidType(String),
    #[error("resource cap exceeded: {0}")]
    CapExceeded(String),
    #[error("objects belong to different root systems")]
    MismatchedRootSystems,
    #[error("stratum is empty: {0}")]
    EmptyStratum(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("truncation too small: {0}")]
    Truncation(String),
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("invalid coefficient field: {0}")]
    FieldInvalid(String),
    #[error("fractional residue in invariant image at exponent {0}")]
    FractionalResidue(usize),
    #[error("internal consistency failure: {0}")]
    Internal(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
