use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    /// A catalog violated one of its invariants. `row` is the offending
    /// `row_index` when the violation is attributable to one.
    #[error("invalid catalog{}: {message}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    Catalog { row: Option<usize>, message: String },

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("parser `{parser}`: executable `{command}` not found")]
    MissingExecutable { parser: String, command: String },

    #[error("unrecognized captured-log path: {}", .0.display())]
    Layout(PathBuf),

    #[error("duplicate run for file {file_id} and parser `{parser}`")]
    DuplicateRun { file_id: usize, parser: String },

    #[error("parser `{0}` is not declared in the catalog")]
    UnknownParser(String),

    #[error("row mismatch: {0}")]
    RowMismatch(String),

    #[error("matrix has no files")]
    NoFiles,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn catalog(row: Option<usize>, message: impl Into<String>) -> Self {
        Error::Catalog {
            row,
            message: message.into(),
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
