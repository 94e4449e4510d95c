//! Crate-wide error type.
//!
//! Shape mismatches in hot numeric paths are programmer errors and panic via
//! `assert!`; everything that can fail on user input or I/O returns [`Error`].

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value or inconsistent dimensions.
    #[error("config error: {0}")]
    Config(String),

    /// A numeric quantity became non-finite.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Malformed or inconsistent checkpoint archive.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Fixed-point iteration failed to converge.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
