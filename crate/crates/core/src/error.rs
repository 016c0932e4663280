use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed CSV: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("no usable rows after dropping {dropped} incomplete rows")]
    NoUsableRows { dropped: usize },

    #[error("non-binary label: column `{column}` has {distinct} distinct values")]
    NonBinaryLabel { column: String, distinct: usize },

    #[error("non-binary sensitive attribute: column `{column}` has {distinct} distinct values")]
    NonBinarySensitive { column: String, distinct: usize },

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("value {value} in `{what}` is not 0 or 1")]
    NotBinary { what: &'static str, value: u8 },

    #[error("empty cell {cell}: {context}")]
    EmptyCell { cell: String, context: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("seed {seed}: {source}")]
    Replication {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
