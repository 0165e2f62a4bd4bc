use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("similarity vector is constant (max == min)")]
    ConstantVector,

    #[error("similarity vector has length {len}, at least 2 entries are required")]
    VectorTooShort { len: usize },

    #[error("non-finite value at index {index}")]
    NonFiniteValue { index: usize },

    #[error("exclusion window of +/-{r_window} around index {argmax} covers all {len} entries")]
    WindowCoversAll {
        len: usize,
        argmax: usize,
        r_window: usize,
    },

    #[error("{available} usable techniques, at least {required} required")]
    TooFewTechniques { available: usize, required: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("technique ensemble is empty")]
    EmptyEnsemble,

    #[error("shape mismatch for {path}: sidecar implies {expected} bytes, payload has {actual}")]
    ShapeMismatch {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },

    #[error("corrupt header {path}: {reason}")]
    CorruptHeader { path: PathBuf, reason: String },

    #[error("ground truth: {0}")]
    InvalidGroundTruth(String),

    #[error("no ranking deep enough for Recall@{k} at query {query}")]
    MissingRanking { query: usize, k: usize },

    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),

    #[error("strategy `{0}` is already registered")]
    DuplicateStrategy(String),

    #[error("strategy `{strategy}`: {reason}")]
    StrategyParams { strategy: String, reason: String },

    #[error("strategy `{0}` requires ground truth")]
    MissingGroundTruth(String),

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ConstantVector => "ConstantVector",
            Error::VectorTooShort { .. } => "VectorTooShort",
            Error::NonFiniteValue { .. } => "NonFiniteValue",
            Error::WindowCoversAll { .. } => "WindowCoversAll",
            Error::TooFewTechniques { .. } => "TooFewTechniques",
            Error::InvalidConfig(_) => "ConfigError",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::EmptyEnsemble => "EmptyEnsemble",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::CorruptHeader { .. } => "CorruptHeader",
            Error::InvalidGroundTruth(_) => "InvalidGroundTruth",
            Error::MissingRanking { .. } => "MissingRanking",
            Error::UnknownStrategy(_) => "UnknownStrategy",
            Error::DuplicateStrategy(_) => "DuplicateStrategy",
            Error::StrategyParams { .. } => "ConfigError",
            Error::MissingGroundTruth(_) => "MissingGroundTruth",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::Io { .. } => "IoError",
            Error::Json { .. } => "JsonError",
            Error::Csv { .. } => "CsvError",
        }
    }
}
