use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("video too short: {total_frames} frames cannot fill one segment of {segment_length}")]
    EmptyVideo {
        total_frames: usize,
        segment_length: usize,
    },
    #[error("invalid segment length {0}")]
    InvalidSegmentLength(usize),
    #[error("non-finite value in input")]
    NonFiniteInput,
    #[error("segment has no clips or frames")]
    EmptySegment,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("malformed pose file: {0}")]
    MalformedPoseFile(String),
    #[error("invalid image size {width}x{height}")]
    InvalidImageSize { width: u32, height: u32 },
    #[error("fusion mode requires a pose feature but none was supplied")]
    MissingPose,
    #[error("pose feature supplied for global-only fusion")]
    UnexpectedPose,
    #[error("bag has no segments")]
    EmptyBag,
    #[error("regularization weights must be non-negative (lambda1={lambda1}, lambda2={lambda2})")]
    NegativeLambda { lambda1: f64, lambda2: f64 },
    #[error("batch has no bag pairs")]
    EmptyBatch,
    #[error("parameter shapes do not match")]
    ShapeMismatch,
    #[error("training needs at least one positive and one negative bag ({positives} positive, {negatives} negative)")]
    InsufficientData { positives: usize, negatives: usize },
    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("labels contain a single class")]
    DegenerateLabels,
    #[error("length mismatch: {scores} scores vs {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("manifest {path}: {message}")]
    ManifestSyntax { path: PathBuf, message: String },
    #[error("missing file {0}")]
    MissingFeatureFile(PathBuf),
    #[error("{path}: feature dimension {found} does not match manifest dimension {expected}")]
    InconsistentDimension {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("unknown category {0:?}")]
    BadCategory(String),
    #[error("{path}: corrupt feature file at byte offset {offset}: {reason}")]
    CorruptFeatureFile {
        path: PathBuf,
        offset: u64,
        reason: String,
    },
    #[error("video {0:?} not found in manifest")]
    UnknownVideo(String),
    #[error("unsupported format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
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
