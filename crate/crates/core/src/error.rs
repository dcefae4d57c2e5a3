use std::path::PathBuf;

use thiserror::Error;

/// Every failure the pipeline can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: cannot parse WAV: {message}")]
    WavParse { path: PathBuf, message: String },

    #[error("{path}: unsupported WAV format: {message}")]
    UnsupportedFormat { path: PathBuf, message: String },

    #[error("{path}: malformed JSON artifact: {message}")]
    Artifact { path: PathBuf, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no spectral peak found for partial {index}")]
    MissingPartial { index: usize },

    #[error("envelope has fewer than two local maxima")]
    DegenerateEnvelope,

    #[error("envelope never reaches the threshold {threshold}")]
    SilentSignal { threshold: f64 },

    #[error("singular sustain system: both steady-state levels equal {level}")]
    SingularSustain { level: f64 },

    #[error("infeasible fit: {0}")]
    InfeasibleFit(String),

    #[error("amplitude is zero where a slope must be matched")]
    ZeroAmplitude,

    #[error("breaking-point refinement on [{start}, {end}] exceeded {cap} subintervals")]
    RefinementFailed { start: f64, end: f64, cap: usize },

    #[error("trajectory left the bounded region at t = {time} s")]
    BlowUp { time: f64 },

    #[error("full trajectory left the invariant leaf: relative residual {residual:e}")]
    LeafViolation { residual: f64 },

    #[error("closed form undefined at t = {time}; escape time {escape_time:?}")]
    Domain {
        time: f64,
        escape_time: Option<f64>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. }
            | Error::WavParse { .. }
            | Error::UnsupportedFormat { .. }
            | Error::Artifact { .. } => 2,
            Error::BlowUp { .. } | Error::Domain { .. } | Error::LeafViolation { .. } => 4,
            _ => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
