use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition of an operation does not hold.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A linear system is too badly conditioned to be trusted.
    #[error("ill-posed problem: {0}")]
    IllPosed(String),

    /// An iterative method stopped without meeting its tolerance.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// A certificate is required but missing or not in the certified state.
    #[error("refused: {0}")]
    Refused(String),

    #[error("unknown strategy `{name}` for {kind}; available: {available}")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
