use std::path::PathBuf;

/// Errors raised across the imaging pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty scene: {0}")]
    EmptyScene(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("solver failure: {message} (condition estimate {condition:.3e})")]
    SolverFailure { message: String, condition: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("malformed {what}: {reason}")]
    Format { what: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(what: impl Into<String>, reason: impl ToString) -> Self {
        Error::Format {
            what: what.into(),
            reason: reason.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad inputs rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::EmptyScene(_)
                | Error::Domain(_)
                | Error::Format { .. }
                | Error::InvalidState(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
