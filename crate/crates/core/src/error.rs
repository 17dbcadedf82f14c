use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument lies outside the domain the model is defined on.
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    /// Shapes or lengths that must agree do not.
    #[error("structural mismatch: {0}")]
    Structural(String),

    #[error("ordering violation: {0}")]
    Ordering(String),

    #[error("not ready: {0}")]
    NotReady(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A file or byte stream does not follow its declared layout.
    #[error("format error: {0}")]
    Format(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
