use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the recognition and mining pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid annotation: {0}")]
    Annotation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("corpus `{corpus}` has {available} sentences, {requested} requested")]
    Size {
        corpus: String,
        available: usize,
        requested: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index {index} out of range for {table} of size {size}")]
    Vocabulary {
        table: &'static str,
        index: usize,
        size: usize,
    },

    #[error("term `{term}` appears in both {first} and {second}")]
    DuplicateTerm {
        term: String,
        first: &'static str,
        second: &'static str,
    },

    #[error("invalid counts: {0}")]
    Counts(String),

    #[error("oracle instance too large: {paths} paths exceed limit {limit}")]
    OracleSize { paths: u128, limit: u128 },

    #[error("training diverged at epoch {epoch}: {message}")]
    Divergence { epoch: usize, message: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Annotation(_) => "annotation",
            Error::Config(_) => "config",
            Error::Size { .. } => "size",
            Error::Shape(_) => "shape",
            Error::Vocabulary { .. } => "vocabulary",
            Error::DuplicateTerm { .. } => "duplicate_term",
            Error::Counts(_) => "counts",
            Error::OracleSize { .. } => "oracle_size",
            Error::Divergence { .. } => "divergence",
            Error::Checkpoint(_) => "checkpoint",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
