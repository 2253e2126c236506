use std::fmt;
use std::path::Path;

/// A command failure: a stable one-word class plus a human message. Printed
/// as `error[class]: message` on a single line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub class: &'static str,
    pub message: String,
}

pub type CliResult<T> = Result<T, CliError>;

/// Classes in exit-code order; the exit code is the index plus one.
pub const ERROR_CLASSES: [&str; 8] = ["config", "io", "parse", "checkpoint", "numeric", "environment", "catalog", "usage"];

impl CliError {
    pub fn new(class: &'static str, message: impl Into<String>) -> Self {
        Self {
            class,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new("config", message)
    }

    pub fn parse(message: impl Into<String>) -> Self {
        Self::new("parse", message)
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::new("io", format!("{}: {err}", path.display()))
    }

    /// Prefixes the message with where the failure happened.
    pub fn context(mut self, what: &str) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }

    pub fn exit_code(&self) -> i32 {
        ERROR_CLASSES.iter().position(|c| *c == self.class).map_or(1, |i| i as i32 + 1)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.class, self.message.replace('\n', " "))
    }
}

impl std::error::Error for CliError {}

impl From<learnpath_core::error::Error> for CliError {
    fn from(e: learnpath_core::error::Error) -> Self {
        Self::new(e.class(), e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        let class = if e.is_io_error() { "io" } else { "parse" };
        Self::new(class, e.to_string())
    }
}
