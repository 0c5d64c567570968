use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} did not converge within {terms} terms")]
    NonConvergent { what: &'static str, terms: usize },

    #[error("floating-point overflow in {0}")]
    Overflow(&'static str),

    #[error("{0} is undefined at x = 0 (supply the classical derivative instead)")]
    UndefinedAtZero(&'static str),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
