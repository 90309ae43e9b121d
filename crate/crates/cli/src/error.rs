use symprod_core::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const SHAPE: i32 = 3;
    pub const NOT_CONVERGED: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Parse(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("iteration did not converge: {0}")]
    NotConverged(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse(_) => exit::PARSE,
            Self::Shape(_) => exit::SHAPE,
            Self::NotConverged(_) => exit::NOT_CONVERGED,
            Self::Failure(_) => exit::FAILURE,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::DimensionMismatch { .. } | Error::SizeMismatch { .. } => Self::Shape(e.to_string()),
            Error::InvalidPoint(_)
            | Error::InvalidParameter(_)
            | Error::UnknownTag(_)
            | Error::UnsupportedExponent(_)
            | Error::Empty(_) => Self::Parse(e.to_string()),
            _ => Self::Failure(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Parse(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Failure(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
