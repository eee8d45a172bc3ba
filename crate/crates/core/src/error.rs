use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input outside the domain of an operation (bad index, mismatched
    /// dimensions, non-finite entries, wrong orientation).
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine could not produce an acceptable result.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Invalid configuration value; the first field names the offending key.
    #[error("invalid configuration `{field}`: {message}")]
    Config { field: String, message: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
