use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the crate.
///
/// Each variant maps onto one of the process exit codes used by the
/// command-line front end (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("self-loop subsumption edge on class `{0}`")]
    SelfLoop(String),

    #[error("subsumption cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),

    #[error("inconsistent axioms:\n{}", .0.join("\n"))]
    InconsistentAxioms(Vec<String>),

    #[error("value {value} outside [0, 1] in {context}")]
    Domain { context: &'static str, value: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Invalid(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}; last finite epoch: {last_finite_epoch:?}")]
    Diverged {
        epoch: usize,
        last_finite_epoch: Option<usize>,
    },

    #[error("gradient audit failed: {0}")]
    GradCheck(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// 0 ok, 1 domain error, 2 I/O, 3 divergence, 4 gradient audit failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Diverged { .. } => 3,
            Error::GradCheck(_) => 4,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
