use thiserror::Error;

/// Errors raised by the library. The CLI maps each kind to an exit code.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested approximation variant does not apply to the given tail index.
    #[error("unsupported variant: {0}")]
    UnsupportedVariant(String),

    /// A distribution or run configuration is incomplete or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// The requested amount of simulation exceeds the configured budget.
    #[error("budget refused: {requested} draws requested, cap is {cap}")]
    Budget { requested: u128, cap: u128 },

    /// A numerical routine failed to converge or produced a non-finite value.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn unsupported(msg: impl Into<String>) -> Error {
    Error::UnsupportedVariant(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
