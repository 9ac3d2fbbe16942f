use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("target column `{0}` not found in header")]
    MissingTargetColumn(String),

    #[error("non-numeric value {value:?} at row {row}, column `{column}`")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("non-finite value at row {row} of feature `{feature}`")]
    NonFinite { feature: String, row: usize },

    #[error("label {0:?} is not covered by the class remap")]
    UnmappedLabel(String),

    #[error("class `{0}` has no instances after remapping")]
    EmptyClass(String),

    #[error("need at least two classes, found {0}")]
    TooFewClasses(usize),

    #[error("feature `{0}` already exists")]
    DuplicateFeature(String),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("cannot exclude `{0}`: it is the last active feature")]
    LastActiveFeature(String),

    #[error("column length {got} does not match {expected} rows")]
    LengthMismatch { expected: usize, got: usize },

    #[error("lineage source `{0}` does not exist")]
    MissingLineageSource(String),

    #[error("empty feature set")]
    EmptyFeatureSet,

    #[error("invalid hyperparameter: {0}")]
    InvalidParams(String),

    #[error("invalid search budget: {0}")]
    InvalidBudget(String),

    #[error("class `{class}` has {count} instances, fewer than {folds} folds")]
    ClassSmallerThanFolds {
        class: String,
        count: usize,
        folds: usize,
    },

    #[error("unknown class index {0}")]
    UnknownClass(usize),

    #[error("{name} must be in [{min}, {max}], got {value}")]
    OutOfRange {
        name: &'static str,
        min: f64,
        max: f64,
        value: f64,
    },

    #[error("degenerate degrees of freedom: {0}")]
    DegenerateDof(String),

    #[error("unknown transform `{0}`")]
    UnknownTransform(String),

    #[error("transform `{transform}` is not applicable to `{feature}`: {reason}")]
    InapplicableTransform {
        feature: String,
        transform: String,
        reason: String,
    },

    #[error("feature generation needs 2 or 3 selected features, got {0}")]
    SelectionSize(usize),

    #[error("candidate `{0}` is invalid (non-finite values)")]
    InvalidCandidate(String),

    #[error("{0}")]
    InvalidRequest(String),

    #[error("session file: {0}")]
    CorruptSession(String),

    #[error("session file version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("replay diverged at history entry {index}: stored {stored}, recomputed {recomputed}")]
    ReplayMismatch {
        index: usize,
        stored: String,
        recomputed: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
