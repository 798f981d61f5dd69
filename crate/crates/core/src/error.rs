use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid arguments: shape mismatches, non-finite entries, parameters
    /// outside their stated ranges.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A numerical routine failed or produced non-finite values.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The geometric condition on the target vector is violated beyond
    /// tolerance, so the requested bound does not apply.
    #[error("target condition violated: {0}")]
    ConditionViolated(String),

    /// Malformed configuration file or override.
    #[error("config error: {0}")]
    Config(String),

    /// File I/O failure, with the offending path.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
