//! Shared error type for all analysis modules.

use std::path::PathBuf;

use crate::vectorstore::Space;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("dimension mismatch ({context}): expected {expected}, got {got}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        got: usize,
    },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("empty id at record {0}")]
    EmptyId(usize),

    #[error("non-finite value in record `{0}`")]
    NonFiniteValue(String),

    #[error("io failure at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("space mismatch: expected {expected}, got {got}")]
    SpaceMismatch { expected: Space, got: Space },

    #[error("no shared ids between the two sets")]
    EmptyIntersection,

    #[error("zero-norm vector ({0})")]
    ZeroNorm(String),

    #[error("unknown id `{0}`")]
    UnknownId(String),

    #[error("k={k} too large (limit {limit})")]
    KTooLarge { k: usize, limit: usize },

    #[error("k={k} too small (need at least {need})")]
    KTooSmall { k: usize, need: usize },

    #[error("missing cluster assignment for id `{0}`")]
    MissingAssignment(String),

    #[error("cluster {0} has no members")]
    EmptyCluster(usize),

    #[error("centroids of clusters {a} and {b} coincide")]
    CoincidentCentroids { a: usize, b: usize },

    #[error("too few candidates: got {got}, need at least {need}")]
    TooFewCandidates { got: usize, need: usize },

    #[error("curve length {curve} does not match {k_values} k values")]
    CurveLengthMismatch { k_values: usize, curve: usize },

    #[error("row {row} out of range (matrix has {rows} rows)")]
    RowOutOfRange { row: usize, rows: usize },

    #[error("no aligned pairs to tally")]
    EmptyPairs,

    #[error("too few points: got {got}, need at least {need}")]
    TooFewPoints { got: usize, need: usize },

    #[error("dimension {dim} too small (need at least {need})")]
    DimensionTooSmall { dim: usize, need: usize },

    #[error("quota {quota} exceeds sub-cluster capacity {capacity}")]
    QuotaTooLarge { quota: usize, capacity: usize },

    #[error("requested {total} samples but only {available} available")]
    TotalTooLarge { total: usize, available: usize },

    #[error("sequence of {len} tokens too short (need at least {need})")]
    TooShort { len: usize, need: usize },

    #[error("reference summary is empty")]
    EmptyReference,

    #[error("not enough comparison units: got {0}, need at least 2")]
    NotEnoughUnits(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
