use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A quadrature, root finder or eigen-iteration failed to converge.
    #[error("numerical error: {0}")]
    Numerical(String),
    /// A parameter combination is legal but impractical (e.g. rejection rate too low).
    #[error("configuration error: {0}")]
    Config(String),
    /// A named hypothesis of an estimate does not hold for the supplied inputs.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn numerical(msg: impl Into<String>) -> Error {
    Error::Numerical(msg.into())
}
