use thiserror::Error;

/// Errors produced by the library.
///
/// The variants are grouped so callers can tell apart malformed input
/// (`Structural`), unmet hypotheses (`Precondition`) and numerical
/// breakdown (`Singular`, `NotReducible`, `SvdNotConverged`).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("structural error: {0}")]
    Structural(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("precondition not met: {0}")]
    Precondition(String),

    #[error("matrix is singular: zero pivot at column {pivot}")]
    Singular { pivot: usize },

    #[error("SVD did not converge within {iterations} iterations")]
    SvdNotConverged { iterations: usize },

    #[error("not reducible: {0}")]
    NotReducible(String),

    #[error("block row cannot be solved for its voltages: {0}")]
    NotSolvable(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
