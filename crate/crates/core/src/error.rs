use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("duplicate record at {timestamp} for {key}")]
    Duplicate { timestamp: String, key: String },

    #[error("gap of {length} consecutive missing values in `{series}` starting at index {start} exceeds max_gap {max_gap}")]
    Gap {
        series: String,
        start: usize,
        length: usize,
        max_gap: usize,
    },

    #[error("missing values at the {side} boundary of `{series}` cannot be interpolated")]
    Boundary { series: String, side: &'static str },

    #[error("incomplete record: {0}")]
    Completeness(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("invalid specification: {0}")]
    Spec(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("singular design: {0}")]
    Singular(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("window `{window}` is not fully covered by predictions: {detail}")]
    Coverage { window: String, detail: String },

    #[error("configuration: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end: 1 usage, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Spec(_) => 1,
            Error::Numeric(_) | Error::Singular(_) => 3,
            _ => 2,
        }
    }
}
