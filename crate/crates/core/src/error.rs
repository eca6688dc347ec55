use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the corpus toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A malformed record in a line-delimited input file.
    #[error("{}: line {line}: {message}", path.display())]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate id {id:?} at lines {first_line} and {second_line}")]
    DuplicateId {
        id: String,
        first_line: usize,
        second_line: usize,
    },

    /// Pairs lacking a text field required by the requested operation.
    #[error("pairs missing {field}: {}", ids.join(", "))]
    MissingText { field: &'static str, ids: Vec<String> },

    /// An external annotation that does not line up with the dataset.
    #[error("annotation for pair {id:?} field {field}: {message}")]
    Annotation {
        id: String,
        field: String,
        message: String,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Score distribution cannot be split into the requested bins.
    #[error("degenerate score distribution: {0}")]
    DegenerateDistribution(String),

    #[error("{0}")]
    Validation(String),
}

impl Error {
    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for errors that signal unusable score distributions rather
    /// than bad input; the CLI maps these to a distinct exit code.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::DegenerateDistribution(_))
    }
}
