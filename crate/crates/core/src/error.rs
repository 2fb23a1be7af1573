use std::path::PathBuf;

/// Errors raised anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("corrupted recurrent state: {0}")]
    CorruptedState(String),

    #[error("stale tape: backward already ran on this recording")]
    StaleTape,

    #[error("poisoned update: non-finite {0}; step skipped")]
    PoisonedUpdate(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("end of trace: slot {slot} is outside a trace of {len} slots")]
    EndOfTrace { slot: usize, len: usize },

    #[error("invalid decision: channel index {index} out of range for {channels} channels")]
    InvalidDecision { index: usize, channels: usize },

    #[error("raw action {0} outside the open interval (0, 1)")]
    EncodingContract(f64),

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("malformed file {path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error("missing checkpoint: {0}")]
    MissingCheckpoint(PathBuf),

    #[error("trace too short: need {needed} slots, have {available}")]
    TraceTooShort { needed: usize, available: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
