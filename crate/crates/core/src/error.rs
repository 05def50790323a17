//! Error type shared by every module of the crate.

use std::fmt;

/// Errors produced by the estimation library.
#[derive(Debug)]
pub enum Error {
    /// A function was evaluated outside its mathematical domain
    /// (e.g. at a pole of a rational function).
    Domain(String),
    /// A caller violated a documented precondition.
    Contract(String),
    /// A numerical procedure failed to converge or to locate a root.
    /// Carries the last residual when one is meaningful.
    Numerical { what: String, residual: Option<f64> },
    /// A requested computation exceeds the configured resource caps.
    Resource(String),
    /// The requested operation is outside the implemented depth.
    Unsupported(String),
    /// An experiment configuration could not be parsed or is inconsistent.
    Config(String),
    /// Underlying I/O failure while reading or writing experiment files.
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
            Error::Numerical { what, residual } => match residual {
                Some(r) => write!(f, "numerical failure: {what} (residual {r:.3e})"),
                None => write!(f, "numerical failure: {what}"),
            },
            Error::Resource(msg) => write!(f, "resource cap exceeded: {msg}"),
            Error::Unsupported(msg) => write!(f, "unsupported: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
