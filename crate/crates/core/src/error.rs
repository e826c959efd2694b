use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid token {symbol:?} at position {position}")]
    InvalidToken { symbol: char, position: usize },

    #[error("empty sequence")]
    EmptySequence,

    #[error("hidden size must be at least 1")]
    ZeroHiddenSize,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index out of range: {what} = {index}, limit {limit}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("sequences have mixed lengths: expected {expected}, found {found} at index {index}")]
    MixedLengths {
        expected: usize,
        found: usize,
        index: usize,
    },

    #[error("column {column} is not a valid one-hot vector")]
    NotOneHot { column: usize },

    #[error("distribution mismatch: {0}")]
    DistributionMismatch(String),

    #[error("motif position {position} outside profile domain 1..={len}")]
    MotifOutOfDomain { position: usize, len: usize },

    #[error("input lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("correlation undefined: constant input")]
    ConstantInput,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("bad magic in {path}: expected {expected:?}")]
    BadMagic { path: PathBuf, expected: String },

    #[error("unsupported format version {found} in {path}")]
    UnsupportedVersion { path: PathBuf, found: u32 },

    #[error("truncated file {path}: {detail}")]
    Truncated { path: PathBuf, detail: String },

    #[error("checksum mismatch for {path}: expected {expected}, found {found}")]
    ChecksumMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("malformed file {path}: {detail}")]
    Malformed { path: PathBuf, detail: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable code for error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidToken { .. } => "invalid_token",
            Error::EmptySequence => "empty_sequence",
            Error::ZeroHiddenSize => "zero_hidden_size",
            Error::Shape(_) => "shape_mismatch",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::Config(_) => "config",
            Error::EmptyDataset => "empty_dataset",
            Error::MixedLengths { .. } => "mixed_lengths",
            Error::NotOneHot { .. } => "not_one_hot",
            Error::DistributionMismatch(_) => "distribution_mismatch",
            Error::MotifOutOfDomain { .. } => "motif_out_of_domain",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::TooFewPoints { .. } => "too_few_points",
            Error::ConstantInput => "constant_input",
            Error::Parse { .. } => "parse",
            Error::BadMagic { .. } => "bad_magic",
            Error::UnsupportedVersion { .. } => "unsupported_version",
            Error::Truncated { .. } => "truncated",
            Error::ChecksumMismatch { .. } => "checksum_mismatch",
            Error::Malformed { .. } => "malformed",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
