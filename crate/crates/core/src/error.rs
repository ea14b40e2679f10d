use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the library.
///
/// Conditions that have a defined fallback (singular amplitude systems,
/// unconverged ADMM runs, singular KKT systems) are reported as flags on the
/// returned values instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("frame size mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("need at least {required} frames, found {found}")]
    TooFewFrames { required: usize, found: usize },

    #[error("intensity {value} at flat index {index} is not a finite value in [0, 1]")]
    InvalidIntensity { index: usize, value: f64 },

    #[error("i/o failure on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode image {}: {message}", path.display())]
    ImageDecode { path: PathBuf, message: String },

    #[error("snapshot matrix is numerically zero")]
    DegenerateInput,

    #[error("eigendecomposition failed: {0}")]
    EigFailure(String),

    #[error("mode mask selects no modes")]
    EmptyMask,

    #[error("every amplitude falls below the zero tolerance")]
    AllZero,

    #[error("sequence has {found} frames, LBP-TOP needs at least {required}")]
    SequenceTooShort { required: usize, found: usize },

    #[error("frame of {rows}x{cols} pixels is too small: {reason}")]
    FrameTooSmall {
        rows: usize,
        cols: usize,
        reason: String,
    },

    #[error("mixed frame rates: {expected} Hz vs {found} Hz")]
    MixedFps { expected: f64, found: f64 },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("sampling retained {retained} frames, at least 2 are required")]
    TooShort { retained: usize },

    #[error("leave-one-subject-out needs at least 2 subjects, found {0}")]
    InsufficientSubjects(usize),

    #[error("leave-one-video-out needs at least 2 samples, found {0}")]
    InsufficientSamples(usize),

    #[error("label {0:?} is not in the class set")]
    LabelOutsideClassSet(String),

    #[error("training set contains no samples")]
    EmptyClass,

    #[error("invalid manifest: {0}")]
    InvalidManifest(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
