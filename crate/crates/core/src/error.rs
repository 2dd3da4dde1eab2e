use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("curve `{0}` has no points")]
    EmptyCurve(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite coordinate in curve `{0}`")]
    NonFiniteCoordinate(String),
    #[error("duplicate curve id `{0}`")]
    DuplicateId(String),
    #[error("invalid p = {0}: must be a finite real >= 1")]
    InvalidP(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("curves of lengths {m1} and {m2} are too long for exhaustive enumeration")]
    TooLargeForBruteForce { m1: usize, m2: usize },
    #[error("limit exceeded: {0}")]
    LimitExceeded(String),
    #[error("invalid traversal: {0}")]
    InvalidTraversal(String),
    #[error("invalid traversal signature: {0}")]
    InvalidSignature(String),
    #[error("curve of length {len} is not compatible with signature {key}")]
    IncompatibleSignature { key: String, len: usize },
    #[error("target dimension {k} exceeds the cap {cap}")]
    Overflow { k: usize, cap: usize },
    #[error("vector length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("vector dimension {dim} exceeds the grid dimension cap {cap}")]
    DimensionTooLargeForGrid { dim: usize, cap: usize },
    #[error("invalid radius range [{r_min}, {r_max}]")]
    InvalidRadiusRange { r_min: f64, r_max: f64 },
    #[error("all vectors are identical")]
    DegenerateDataset,
    #[error("build budget exceeded: {stored} stored vectors > cap {cap}")]
    BuildBudgetExceeded { stored: usize, cap: usize },
    #[error("index is empty")]
    EmptyIndex,
    #[error("query curve has {len} points but the index supports at most {cap}")]
    QueryTooLong { len: usize, cap: usize },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("corrupt index: {0}")]
    CorruptIndex(String),
    #[error("index version mismatch: file has {found}, this build reads {expected}")]
    VersionMismatch { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}
