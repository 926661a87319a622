//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain on which an operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Array or index shapes do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A configuration file or parameter set is malformed.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was requested on an input class it does not handle.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A computation would exceed a hard resource guard.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Both penalties are zero and the design cannot identify the coefficients.
    #[error("identifiability guard: {0}")]
    Identifiability(String),

    /// A linear system or decomposition could not be solved reliably.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line tool: 3 for numerical
    /// failures, 2 for everything that stems from bad input.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) | Error::Identifiability(_) => 3,
            _ => 2,
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
