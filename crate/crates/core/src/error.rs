use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image {width}x{height} is smaller than the required {min_width}x{min_height}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min_width: usize,
        min_height: usize,
    },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("failed to decode image {path}: {message}")]
    ImageDecode { path: PathBuf, message: String },

    #[error("malformed line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("fixation out of bounds on line {line}: ({x}, {y}) outside {width}x{height}")]
    OutOfBounds {
        line: usize,
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },

    #[error("fixation file {0} contains no records")]
    EmptyFile(PathBuf),

    #[error("fixation set is empty")]
    EmptyFixations,

    #[error("dimension mismatch: expected {expected_width}x{expected_height}, got {width}x{height}")]
    DimensionMismatch {
        expected_width: usize,
        expected_height: usize,
        width: usize,
        height: usize,
    },

    #[error("malformed channel-map header: {0}")]
    MalformedHeader(String),

    #[error("channel '{channel}' declared but file {path} is missing")]
    MissingChannel { channel: String, path: PathBuf },

    #[error("input contains a single class; both +1 and -1 labels are required")]
    SingleClassInput,

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("k = {k} exceeds the number of training rows {n}")]
    KExceedsN { k: usize, n: usize },

    #[error("no boosting round produced a weak learner with error below 0.5")]
    NoUsefulWeakLearner,

    #[error("empty input")]
    EmptyInput,

    #[error("cannot evaluate an empty set of predictions")]
    EmptyEvaluation,

    #[error("fold {fold} is too small or lacks one of the classes")]
    FoldTooSmall { fold: usize },

    #[error("unsupported file version {found} (this build reads up to {supported})")]
    VersionMismatch { found: u16, supported: u16 },

    #[error("corrupt file: {0}")]
    CorruptFile(String),

    #[error("missing upstream artifact: {0}")]
    MissingUpstream(PathBuf),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{stage}: {failed} item(s) failed")]
    StageFailed { stage: &'static str, failed: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
