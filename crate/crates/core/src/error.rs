use std::path::PathBuf;

/// Errors raised by the simulation library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument fell outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value violates one of the model's constraints.
    #[error("configuration error in `{key}`: {constraint}")]
    Config { key: String, constraint: String },

    /// A formula or monitor was requested outside the regime where it applies.
    #[error("regime error: {0}")]
    Regime(String),

    /// Input data failed validation (e.g. an identically-zero initial profile).
    #[error("validation error: {0}")]
    Validation(String),

    /// The discrete scheme broke one of its own structural guarantees.
    #[error("scheme error: {0}")]
    Scheme(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, constraint: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            constraint: constraint.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
