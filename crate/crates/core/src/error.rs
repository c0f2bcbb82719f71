use thiserror::Error;

/// Errors raised across the simulator and verification harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("resonant background: |b.j| = {dot:e} at j = {j:?}")]
    ResonantBackground { j: Vec<i64>, dot: f64 },

    #[error("blow-up at t = {t} (step {step}): {reason}")]
    BlowUp { t: f64, step: u64, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn precondition<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Precondition(msg.into()))
}
