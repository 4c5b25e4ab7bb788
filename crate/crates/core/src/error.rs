use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("engine {engine_id}: cycles are not contiguous (expected {expected}, found {found})")]
    NonContiguousCycles {
        engine_id: u32,
        expected: u32,
        found: u32,
    },

    #[error("engine {engine_id}: trajectory has {length} cycles, need at least {min}")]
    TooShort {
        engine_id: u32,
        length: usize,
        min: usize,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("sensor {sensor_id}: degenerate baseline-to-tail span {span:e}")]
    DegenerateSpan { sensor_id: u8, span: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("singular normal equations; use a ridge term > 0")]
    Singular,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: usize },

    #[error("no score for engine {engine_id} at cycle {cycle}")]
    MissingScore { engine_id: u32, cycle: u32 },

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
