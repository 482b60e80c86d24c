use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown table `{0}`")]
    UnknownTable(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("duplicate table `{0}`")]
    DuplicateTable(String),

    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),

    #[error("duplicate link id `{0}`")]
    DuplicateLinkId(String),

    #[error("link `{left}` -> `{right}` references its own table; self-referencing links are not supported")]
    SelfReferencingLink { left: String, right: String },

    #[error("column class of `{0}` is unknown")]
    UnknownClass(String),

    #[error("malformed metadata at {location}: {message}")]
    MalformedMetadata { location: String, message: String },

    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),

    #[error("selected link `{0}` does not exist")]
    UnknownLinkSelected(String),

    #[error("paths do not share endpoints: expected {expected}, found {found}")]
    MixedEndpoints { expected: String, found: String },

    #[error("paths do not share an origin: expected `{expected}`, found `{found}`")]
    MixedOrigins { expected: String, found: String },

    #[error("no join path connects {0}")]
    NoJoinPath(String),

    #[error("planning deadline expired")]
    Timeout,

    #[error("at least one target table is required")]
    EmptyTargets,

    #[error("column `{0}` belongs to a table outside the join sequence")]
    ColumnOutsideSequence(String),

    #[error("the most-rows policy needs a query executor")]
    ExecutorRequired,

    #[error("cannot align select lists for union: {0}")]
    ColumnMismatch(String),

    #[error("no CSV files found in {}", .0.display())]
    EmptyDirectory(PathBuf),

    #[error("{}: duplicate header `{column}`", .file.display())]
    DuplicateHeader { file: PathBuf, column: String },

    #[error("{}:{line}: expected {expected} fields, found {found}", .file.display())]
    RaggedRow {
        file: PathBuf,
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("{}: {message}", .file.display())]
    MalformedCsv { file: PathBuf, message: String },

    #[error("sql error: {0}")]
    Sql(String),

    #[error("statement is not read-only")]
    WriteRejected,

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable code, one per variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::UnknownTable(_) => "UnknownTable",
            Error::UnknownColumn(_) => "UnknownColumn",
            Error::DuplicateTable(_) => "DuplicateTable",
            Error::DuplicateColumn(_) => "DuplicateColumn",
            Error::DuplicateLinkId(_) => "DuplicateLinkId",
            Error::SelfReferencingLink { .. } => "SelfReferencingLink",
            Error::UnknownClass(_) => "UnknownClass",
            Error::MalformedMetadata { .. } => "MalformedMetadata",
            Error::BackendUnavailable(_) => "BackendUnavailable",
            Error::UnknownLinkSelected(_) => "UnknownLinkSelected",
            Error::MixedEndpoints { .. } => "MixedEndpoints",
            Error::MixedOrigins { .. } => "MixedOrigins",
            Error::NoJoinPath(_) => "NoJoinPath",
            Error::Timeout => "Timeout",
            Error::EmptyTargets => "EmptyTargets",
            Error::ColumnOutsideSequence(_) => "ColumnOutsideSequence",
            Error::ExecutorRequired => "ExecutorRequired",
            Error::ColumnMismatch(_) => "ColumnMismatch",
            Error::EmptyDirectory(_) => "EmptyDirectory",
            Error::DuplicateHeader { .. } => "DuplicateHeader",
            Error::RaggedRow { .. } => "RaggedRow",
            Error::MalformedCsv { .. } => "MalformedCsv",
            Error::Sql(_) => "SqlError",
            Error::WriteRejected => "WriteRejected",
            Error::Io { .. } => "IoError",
        }
    }

    /// True for errors caused by the caller's request rather than the data or backend.
    pub fn is_request_error(&self) -> bool {
        matches!(
            self,
            Error::UnknownTable(_)
                | Error::UnknownColumn(_)
                | Error::SelfReferencingLink { .. }
                | Error::UnknownLinkSelected(_)
                | Error::MixedEndpoints { .. }
                | Error::MixedOrigins { .. }
                | Error::EmptyTargets
                | Error::ColumnOutsideSequence(_)
                | Error::ExecutorRequired
                | Error::ColumnMismatch(_)
                | Error::WriteRejected
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<rusqlite::Error> for Error {
    fn from(e: rusqlite::Error) -> Self {
        Error::Sql(e.to_string())
    }
}
