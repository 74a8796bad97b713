use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A malformed cell or record. `row` is 1-based and counts the header as row 1.
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("{0}: file is empty")]
    EmptyFile(PathBuf),

    #[error("missing mandatory \"name\" column")]
    MissingNameColumn,

    #[error("no columns")]
    NoColumns,

    #[error("invalid tier path: {0}")]
    InvalidPath(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("nothing to contrast: vocabulary has {0} token(s)")]
    NothingToContrast(usize),

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),

    #[error("model format: {0}")]
    ModelFormat(String),

    #[error("no ground-truth records")]
    EmptyRecords,

    #[error("conflicting ground truth: {0}")]
    ConflictingGroundTruth(String),

    #[error("unknown entry id {0}")]
    UnknownEntry(String),

    #[error("empty base schema")]
    EmptyBase,

    #[error("truth map has no entry for source column {0:?}")]
    MissingTruth(String),

    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),

    #[error("strategy: {0}")]
    InvalidStrategy(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
