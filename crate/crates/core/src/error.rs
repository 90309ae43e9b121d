use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("configuration size mismatch: expected k = {expected}, got k = {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("invalid cost matrix: {0}")]
    InvalidCost(String),

    #[error("exponent p = {0} is not supported by this ground space")]
    UnsupportedExponent(f64),

    #[error("operation not supported: {0}")]
    Unsupported(&'static str),

    #[error("enumeration cap exceeded: {0}")]
    EnumerationCap(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("zero total weight in district {0}")]
    ZeroWeight(usize),

    #[error("unknown dataset tag `{0}`")]
    UnknownTag(String),

    #[error("election `{0}` missing from unit data")]
    MissingElection(String),

    #[error("infeasible: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;
