use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{file}:{line}: {message}")]
    Load {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown vertex id {0}")]
    UnknownVertex(u64),

    #[error("unknown edge id {0}")]
    UnknownEdge(u64),

    #[error("label `{0}` is not registered")]
    UnknownLabel(String),

    #[error("unknown table `{0}`")]
    UnknownTable(String),

    #[error("unresolvable attribute `{0}`")]
    UnresolvedAttribute(String),

    #[error("type-incompatible comparison: {0}")]
    TypeMismatch(String),

    #[error("temporary label `{0}` collides with a registered vertex label")]
    TempLabelCollision(String),

    #[error("ill-formed expression: {0}")]
    IllFormed(String),

    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("table `{0}` is not joinable with any graph vertex property")]
    NotJoinable(String),

    #[error("pattern has no label anchor")]
    NoAnchor,

    #[error("moved relation `{0}` is missing")]
    MissingMovedTable(String),

    #[error("plan space too large: {n} joinable tables exceeds the cap of {cap}")]
    PlanSpaceTooLarge { n: usize, cap: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("incompatible model file: {0}")]
    ModelFormat(String),

    #[error("infeasible configuration: {0}")]
    Config(String),

    #[error("execution exceeded its deadline")]
    Timeout,

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn load(file: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Load {
            file: file.into(),
            line,
            message: message.into(),
        }
    }
}
