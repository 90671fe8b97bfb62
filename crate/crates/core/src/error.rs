use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// A requested tolerance cannot be met with the supplied discretization.
    #[error("accuracy error: {0}")]
    Accuracy(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn accuracy<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Accuracy(msg.into()))
}
