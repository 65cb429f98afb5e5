use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}:{line}: {message}")]
    Parse {
        context: String,
        line: usize,
        message: String,
    },

    #[error("document {doc_id} has no sentences")]
    EmptyDocument { doc_id: String },

    #[error("empty sentence ({context})")]
    EmptySentence { context: String },

    #[error("duplicate document id {0}")]
    DuplicateDocId(String),

    #[error("count mismatch: {0}")]
    CountMismatch(String),

    #[error("unknown document id {0}")]
    UnknownDocument(String),

    #[error("malformed model file: {0}")]
    MalformedModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("search space of {paths} paths exceeds the cap of {cap}")]
    SearchSpaceTooLarge { paths: f64, cap: f64 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}
