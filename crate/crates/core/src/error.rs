use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("repository unreadable at {path}: {reason}")]
    RepositoryUnreadable { path: PathBuf, reason: String },

    #[error("empty commit history")]
    EmptyHistory,

    #[error("git command failed: {0}")]
    Git(String),

    #[error("invalid lexicon: {0}")]
    LexiconInvalid(String),

    #[error("classifier unavailable: {0}")]
    ClassifierUnavailable(String),

    #[error("malformed catalog: {0}")]
    CatalogMalformed(String),

    #[error("unknown category {0}")]
    UnknownCategory(String),

    #[error("vector dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("malformed exchange file at line {line}: {reason}")]
    ExchangeMalformed { line: usize, reason: String },

    #[error("provider {provider} has no vector for {id}")]
    UnknownTextId { provider: String, id: String },

    #[error("author {0} has no activity before the query time")]
    UnknownAuthor(String),

    #[error("sample of {needed} exceeds population of {population}")]
    PopulationTooSmall { needed: usize, population: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration invalid: {0}")]
    Config(String),

    #[error("stage {stage} failed: {cause}")]
    StageFailed { stage: String, cause: String },

    #[error("malformed artifact {path}:{line}: {reason}")]
    Artifact {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
