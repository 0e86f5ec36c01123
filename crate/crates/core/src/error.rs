use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid beat: {0}")]
    InvalidBeat(String),
    #[error("invalid target length {0} (must be >= 2)")]
    InvalidTargetLength(usize),
    #[error("beat is constant (max == min), cannot min-max normalize")]
    ConstantBeat,
    #[error("cannot sample {requested} beats from a set of {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("degenerate split: {train} train / {test} test")]
    DegenerateSplit { train: usize, test: usize },
    #[error("series must contain at least one sample")]
    LengthZero,
    #[error("band radius {radius} too narrow for lengths {left} and {right}")]
    BandTooNarrow {
        radius: usize,
        left: usize,
        right: usize,
    },
    #[error("empty set")]
    EmptySet,
    #[error("invalid inputs: {0}")]
    InvalidInputs(String),
    #[error("epoch mismatch: {0}")]
    EpochMismatch(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("backward called without a matching forward cache")]
    MissingCache,
    #[error("label {label} out of range for {classes} classes")]
    BadLabel { label: usize, classes: usize },
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        detail: String,
    },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("unsupported checkpoint version {found} (this build reads {supported})")]
    VersionMismatch { found: u32, supported: u32 },
    #[error("checkpoint checksum mismatch")]
    ChecksumMismatch,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("training set contains a single class")]
    SingleClassTrainSet,
    #[error("empty test set")]
    EmptyTestSet,
    #[error("run directory {0} is not empty (use --force)")]
    RunDirNotEmpty(PathBuf),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

impl Error {
    /// Stable machine-readable code printed by the command-line tool.
    pub fn code(&self) -> &'static str {
        match self {
            Error::FileNotFound(_) => "FILE_NOT_FOUND",
            Error::Io(_) => "IO",
            Error::MalformedRow { .. } => "MALFORMED_ROW",
            Error::LengthMismatch { .. } => "LENGTH_MISMATCH",
            Error::InvalidBeat(_) => "INVALID_BEAT",
            Error::InvalidTargetLength(_) => "INVALID_TARGET_LENGTH",
            Error::ConstantBeat => "CONSTANT_BEAT",
            Error::SampleTooLarge { .. } => "SAMPLE_TOO_LARGE",
            Error::DegenerateSplit { .. } => "DEGENERATE_SPLIT",
            Error::LengthZero => "LENGTH_ZERO",
            Error::BandTooNarrow { .. } => "BAND_TOO_NARROW",
            Error::EmptySet => "EMPTY_SET",
            Error::InvalidInputs(_) => "INVALID_INPUTS",
            Error::EpochMismatch(_) => "EPOCH_MISMATCH",
            Error::ShapeMismatch(_) => "SHAPE_MISMATCH",
            Error::MissingCache => "MISSING_CACHE",
            Error::BadLabel { .. } => "BAD_LABEL",
            Error::BadConfig(_) => "BAD_CONFIG",
            Error::NonFiniteLoss { .. } => "NON_FINITE_LOSS",
            Error::CorruptCheckpoint(_) => "CORRUPT_CHECKPOINT",
            Error::VersionMismatch { .. } => "VERSION_MISMATCH",
            Error::ChecksumMismatch => "CHECKSUM_MISMATCH",
            Error::InsufficientData(_) => "INSUFFICIENT_DATA",
            Error::SingleClassTrainSet => "SINGLE_CLASS_TRAIN_SET",
            Error::EmptyTestSet => "EMPTY_TEST_SET",
            Error::RunDirNotEmpty(_) => "RUN_DIR_NOT_EMPTY",
            Error::Json(_) => "JSON",
            Error::Usage(_) => "USAGE",
        }
    }
}
