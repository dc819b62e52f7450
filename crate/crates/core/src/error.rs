use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input outside the domain of an operation (bad parameter, point outside a window, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// A numerical procedure did not reach its tolerance.
    #[error("numerical failure in {what}: achieved {achieved:e}")]
    Numerical { what: String, achieved: f64 },
    /// Evaluation landed on a zero of a multiplier.
    #[error("pole: query within {distance:e} of zero ({x}, {y})")]
    Pole { x: f64, y: f64, distance: f64 },
    /// A certificate computed by the library failed its threshold.
    #[error("certificate failed: {0}")]
    Certificate(String),
    /// Malformed external data.
    #[error("invalid input: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(what: impl Into<String>, achieved: f64) -> Self {
        Error::Numerical { what: what.into(), achieved }
    }
}
