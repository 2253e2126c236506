use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch in {op}: expected {expected}, got {actual}")]
    Shape {
        op: &'static str,
        expected: String,
        actual: String,
    },

    #[error("invalid action {action}: catalog has {count} exercises")]
    InvalidAction { action: usize, count: usize },

    #[error("episode already finished after {steps} steps")]
    EpisodeFinished { steps: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            op,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    /// Stable one-word class used by command-line front ends.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Config(_) | Error::Shape { .. } => "config",
            Error::InvalidAction { .. } | Error::EpisodeFinished { .. } => "environment",
            Error::NonFinite(_) => "numeric",
            Error::Empty(_) => "config",
            Error::Parse { .. } => "parse",
            Error::Checkpoint(_) => "checkpoint",
            Error::Io(_) => "io",
        }
    }
}
