use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {error}", path.display())]
    Io { path: PathBuf, error: std::io::Error },

    #[error("duplicate fileid `{0}`")]
    DuplicateFileId(String),

    #[error("invalid manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("records for one vote must share a fileid (got `{expected}` and `{found}`)")]
    FileIdMismatch { expected: String, found: String },

    #[error("expected exactly {expected} records for `{fileid}`, got {found}")]
    VoteArity {
        fileid: String,
        expected: usize,
        found: usize,
    },

    #[error("vector error: {0}")]
    Vector(&'static str),

    #[error("backend `{backend}` failed: {message}")]
    Backend { backend: String, message: String },

    #[error("turtle syntax error at line {line}, column {column}: {message}")]
    Turtle {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("cannot serialize as RDF/XML: {0}")]
    RdfXml(String),

    #[error("csv error: {0}")]
    Csv(String),

    #[error("query syntax error at offset {offset}: {message}")]
    QuerySyntax { offset: usize, message: String },

    #[error("unknown prefix `{0}`")]
    UnknownPrefix(String),

    #[error("regression needs at least 3 points and a non-constant x ({0})")]
    Regression(&'static str),

    #[error("invalid record `{id}`: {message}")]
    InvalidRecord { id: String, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            error: source,
        }
    }
}
