use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violated a precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A sample was too degenerate for the requested statistic
    /// (zero pooled variance, constant density sample, and so on).
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    /// A batch was requested that the stream does not fully contain.
    #[error("batch {batch} incomplete: first missing observation index is {first_missing}")]
    IncompleteBatch { batch: usize, first_missing: usize },

    /// Null moments were requested from a provider that cannot supply them.
    #[error(
        "no null moments for {kind} at sample sizes ({n0}, {n1}); \
         calibrate a moment source covering these sizes first"
    )]
    MissingMoments { kind: String, n0: usize, n1: usize },

    /// Every simulated calibration stream crossed its threshold before the
    /// horizon was reached.
    #[error(
        "all {num_streams} calibration streams were eliminated before t={t}; \
         increase num_streams or lower alpha"
    )]
    SurvivorsExhausted { num_streams: usize, t: usize },

    /// A detector that already latched a detection was stepped again.
    #[error("detector already reported a detection; construct a fresh state to continue")]
    AlreadyDetected,

    /// A threshold cache file required by the harness is absent.
    #[error("threshold cache not found at {path}; run `driftwatch calibrate` first")]
    MissingCache { path: PathBuf },

    /// The run configuration is unusable.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateSample(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
