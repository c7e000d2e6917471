use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the admissible domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative or linear-algebra routine failed.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The operation is not defined for the given copula family.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// Input has too few observations or mismatched lengths.
    #[error("size error: {0}")]
    Size(String),

    /// A partition is invalid for the data it is evaluated against.
    #[error("partition error: {0}")]
    Partition(String),

    /// A group of observations has zero variance.
    #[error("degenerate data: {0}")]
    Degenerate(String),

    /// A quantity was requested before the state that produces it exists.
    #[error("state error: {0}")]
    State(String),

    /// Failure while fitting a specific vine edge.
    #[error("fitting edge {edge} failed: {source}")]
    Edge {
        edge: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Malformed user input (CSV cells, config files, CLI lists).
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True when the failure is numerical rather than a usage problem.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Numeric(_) | Error::Degenerate(_) => true,
            Error::Edge { source, .. } => source.is_numeric(),
            _ => false,
        }
    }

    pub(crate) fn on_edge(self, edge: impl ToString) -> Error {
        Error::Edge {
            edge: edge.to_string(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
