use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed record: {reason}")]
    MalformedLine { line: u64, reason: String },
    #[error("line {line}: timestamp {t_ms} ms precedes the previous record")]
    NonMonotonicTime { line: u64, t_ms: u64 },
    #[error("line {line}: gaze coordinate out of [0,1]")]
    CoordOutOfRange { line: u64 },
    #[error("session has zero duration")]
    EmptySession,
    #[error("session uses more than {0} distinct control codes")]
    TooManyControls(usize),
    #[error("window [{start_s}s, +{width_s}s) exceeds the {duration_s}s session")]
    WindowOutOfBounds {
        start_s: f64,
        width_s: f64,
        duration_s: f64,
    },
    #[error("gaze coverage {coverage:.3} below required {required:.3}")]
    InsufficientGaze { coverage: f64, required: f64 },
    #[error("session of {duration_s}s is shorter than the {width_s}s window")]
    SessionTooShort { duration_s: f64, width_s: f64 },
    #[error("feature column `{0}` is constant")]
    ConstantColumn(String),
    #[error("need at least two rows")]
    TooFewRows,
    #[error("sample is empty")]
    EmptySample,
    #[error("class {0} is absent")]
    MissingClass(&'static str),
    #[error("only one class present")]
    SingleClass,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("need at least two distinct players")]
    SinglePlayer,
    #[error("expected {expected} features, got {got}")]
    MissingFeature { expected: usize, got: usize },
    #[error("labels ({labels}) and scores ({scores}) differ in length")]
    LengthMismatch { labels: usize, scores: usize },
    #[error("ensemble contains no splits")]
    NoSplits,
    #[error("model document rejected: {0}")]
    SchemaViolation(String),
    #[error("no valid gaze samples")]
    NoValidGaze,
    #[error("invalid duration: {0}")]
    InvalidDuration(String),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("{}: {source}", path.display())]
    InFile { path: PathBuf, source: Box<Error> },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_file(path: impl Into<PathBuf>, source: Error) -> Self {
        Error::InFile {
            path: path.into(),
            source: Box::new(source),
        }
    }

    /// Process exit status for the command-line front end: 3 for IO and
    /// parse failures, 4 for data-shape problems, 5 for model schema errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InFile { source, .. } => source.exit_code(),
            Error::Io { .. }
            | Error::MalformedLine { .. }
            | Error::NonMonotonicTime { .. }
            | Error::CoordOutOfRange { .. }
            | Error::TooManyControls(_) => 3,
            Error::SchemaViolation(_) => 5,
            Error::InvalidParams(_) | Error::InvalidDuration(_) => 2,
            _ => 4,
        }
    }
}
