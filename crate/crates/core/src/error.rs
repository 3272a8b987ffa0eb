//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("overflow: {0}")]
    Overflow(String),

    /// Adaptive quadrature hit its depth or panel limit.
    #[error("quadrature did not converge (partial value {value}, error estimate {error})")]
    NoConvergence { value: f64, error: f64 },

    /// The principal-value extrapolation sequence failed to settle.
    #[error("principal value did not converge (last value {value}, residual {residual})")]
    PvDivergent { value: f64, residual: f64 },

    /// A slowly decaying half-line integrand.
    #[error("slow decay on the half line (partial value {value}, last panel {tail})")]
    SlowDecay { value: f64, tail: f64 },

    #[error("diagonal singularity at x = {x}, y = {y}")]
    Diagonal { x: f64, y: f64 },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("no cases")]
    NoCases,

    #[error("io: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
