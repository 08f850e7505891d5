use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// A result that the power algebra guarantees cannot happen did happen.
    #[error("invariant violated: {0}")]
    Invariant(String),

    /// One of the two sum phasors has zero magnitude, so every phase is optimal.
    #[error("degenerate alignment: {0}")]
    DegenerateAlignment(String),

    /// Feedback did not match what the session expected for the current window.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// The requested efficiency cannot be guaranteed for these gains.
    #[error("target efficiency unreachable: arccos argument squared is {radicand}")]
    TargetUnreachable { radicand: f64 },

    #[error("unknown experiment '{0}'")]
    UnknownExperiment(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by a bad input or a violated math invariant
    /// rather than the environment.
    pub fn is_precondition(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let source = match err.into_kind() {
            csv::ErrorKind::Io(io) => io,
            other => std::io::Error::other(format!("{other:?}")),
        };
        Error::Io {
            path: PathBuf::from("<csv>"),
            source,
        }
    }
}
