use thiserror::Error;

use crate::expr::ParseError;

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const ASSERTION: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NON_CONVERGENT: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid function: {0}")]
    Function(#[from] ParseError),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => exit::NON_CONVERGENT,
            _ => exit::CONFIG,
        }
    }
}

impl From<qbask_core::Error> for CliError {
    fn from(e: qbask_core::Error) -> Self {
        use qbask_core::Error as E;
        match e {
            E::NonConvergent { .. } | E::Overflow(_) => CliError::Numerical(e.to_string()),
            E::InvalidParameter(_) | E::UndefinedAtZero(_) => CliError::Config(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}
