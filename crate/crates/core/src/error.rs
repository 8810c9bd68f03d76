use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unknown protocol `{0}`")]
    UnknownProtocol(String),
    #[error("registry: {0}")]
    Registry(String),
    #[error("expression `{expr}`: {msg}")]
    Expression { expr: String, msg: String },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Usage-type errors map to exit code 2, everything numerical to 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::UnknownProtocol(_) | Error::Invalid(_) | Error::Registry(_) | Error::Expression { .. } => 2,
            Error::Io(_) => 2,
            Error::Dimension(_) | Error::Numerical(_) => 3,
        }
    }
}
