use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// CLI exit code convention: 2 usage, 3 validation, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Dimension(_) | Error::Validation(_) | Error::Io(_) => 3,
            Error::Numerical(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
