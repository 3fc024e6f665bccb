use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the localization stack.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (shape, dimension, endpoint).
    #[error("contract violation: {0}")]
    Contract(String),

    /// An id that does not exist in the topology.
    #[error("unknown {kind} id {id}")]
    Lookup { kind: &'static str, id: usize },

    /// Topology construction failed.
    #[error("invalid topology: {0}")]
    Topology(String),

    /// Solver or filter parameters are out of range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Non-finite values appeared during iteration.
    #[error("numerical fault at iteration {iteration}: {detail}")]
    Numerical { iteration: usize, detail: String },

    /// A node was handed an incomplete or inconsistent inbox.
    #[error("synchronization fault at node {node}, round {round}: {detail}")]
    Sync {
        node: usize,
        round: usize,
        detail: String,
    },

    /// The problem has no anchor information, so translations are unobservable.
    #[error("unobservable problem: {0}")]
    Observability(String),

    /// The extended Kalman filter produced non-finite state.
    #[error("filter divergence: {0}")]
    Divergence(String),

    /// Scenario or experiment configuration is invalid.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error's category.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parameter(_) | Error::Topology(_) => 2,
            Error::Numerical { .. } | Error::Divergence(_) | Error::Observability(_) => 3,
            Error::Io { .. } | Error::Serialization(_) => 4,
            Error::Contract(_) | Error::Lookup { .. } | Error::Sync { .. } => 5,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
