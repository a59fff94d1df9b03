use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller violated a precondition (bad index, shape, argument).
    #[error("usage error: {0}")]
    Usage(String),

    /// A graph does not satisfy a structural requirement such as connectivity.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("generation failed: {0}")]
    Generation(String),

    /// Incompatible configuration, e.g. a dataset whose task does not match the model.
    #[error("config error: {0}")]
    Config(String),

    #[error("non-finite loss at epoch {epoch}, graph {graph}: {loss}")]
    NonFiniteLoss { epoch: usize, graph: usize, loss: f64 },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
