use std::io;

use crate::ClassId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("row {row} has zero norm and cannot be normalized")]
    ZeroNormRow { row: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("invalid shape: {0}")]
    Shape(String),

    #[error("bad magic at byte offset {offset}: expected {expected:?}, found {found:?}")]
    BadMagic { offset: usize, expected: String, found: String },

    #[error("truncated payload at byte offset {offset}: expected {expected} bytes, found {actual}")]
    Truncated { offset: usize, expected: u64, actual: u64 },

    #[error("element count overflows at byte offset {offset}")]
    Overflow { offset: usize },

    #[error("malformed csv: {0}")]
    Csv(String),

    #[error("class {class} has no rows")]
    EmptyClass { class: ClassId },

    #[error("class {class} appears in both base and novel splits")]
    OverlappingSplit { class: ClassId },

    #[error("episode needs {needed} classes but the split offers {available}")]
    InsufficientClasses { needed: usize, available: usize },

    #[error("class {class} needs {needed} samples but has {available}")]
    InsufficientSamples { class: ClassId, needed: usize, available: usize },

    #[error("requested {requested} clusters from {points} points")]
    TooManyClusters { requested: usize, points: usize },

    #[error("subsample of {subsample} exceeds {queries} queries")]
    SubsampleTooLarge { subsample: usize, queries: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
