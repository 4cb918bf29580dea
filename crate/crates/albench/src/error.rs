use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension `{name}`: {reason}")]
    InvalidDimension { name: String, reason: String },

    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coordinate {value} of dimension `{name}` outside [{lower}, {upper}]")]
    OutOfBounds {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("grid of {requested} points exceeds the pool limit of {limit}")]
    GridOverflow { requested: u128, limit: u128 },

    #[error("invalid pool spec: {0}")]
    InvalidPoolSpec(String),

    #[error("initial design requires an unlabeled pool with 1 <= n0 <= {pool_size}, got n0 = {n0}")]
    InvalidInitialDesign { n0: usize, pool_size: usize },

    #[error("invalid training set: {0}")]
    InvalidTrainingSet(String),

    #[error("invalid kernel config: {0}")]
    InvalidKernel(String),

    #[error("linear system is singular or ill-conditioned{}", if *escalated { " after jitter escalation" } else { "" })]
    SingularSystem { escalated: bool },

    #[error("model of kind `{kind}` does not support {capability}")]
    Unsupported { kind: String, capability: String },

    #[error("sampler `{strategy}` requires {requirement}")]
    IncompatibleStrategy {
        strategy: String,
        requirement: String,
    },

    #[error("candidate pool exhausted")]
    PoolExhausted,

    #[error("empty labeled set")]
    EmptyLabeledSet,

    #[error("unknown builtin simulator `{0}`")]
    UnknownSimulator(String),

    #[error("query failed at {point:?}: {cause}")]
    QueryFailure { point: Vec<f64>, cause: String },

    #[error("table error in {path}: {reason}")]
    Table { path: PathBuf, reason: String },

    #[error("run config invalid: {0}")]
    InvalidRunConfig(String),

    #[error("benchmark error: {0}")]
    Bench(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
