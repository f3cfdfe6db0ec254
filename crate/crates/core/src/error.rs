use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A function of a real variable was evaluated outside its domain
    /// (negative or non-finite input).
    #[error("domain error: {what} = {value} is outside the domain")]
    Domain { what: &'static str, value: f64 },

    /// Quadrature failed to reach the requested tolerance.
    #[error("quadrature did not converge: achieved tolerance {achieved:.3e}, requested {requested:.3e}")]
    QuadratureNonConvergence { achieved: f64, requested: f64 },

    /// An iterative numerical procedure failed; the message carries the
    /// diagnostic (e.g. the achieved residual).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A measurement could not produce a verdict (no admissible radius,
    /// too few interface points, ...).
    #[error("inconclusive: {0}")]
    Inconclusive(String),

    /// Field/grid shape mismatch.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Malformed field file or configuration.
    #[error("invalid file: {0}")]
    InvalidFile(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
