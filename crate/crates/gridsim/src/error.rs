use thiserror::Error;

/// Error type shared by all gridsim modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("solver did not converge: {0}")]
    Convergence(String),
    #[error("topology error: {0}")]
    Topology(String),
}

impl Error {
    /// CLI exit code: 1 for input/domain problems, 2 for numeric/solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric(_) | Error::Convergence(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
