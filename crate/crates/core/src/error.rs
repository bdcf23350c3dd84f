use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at byte {offset}: {msg}")]
    Parse { offset: usize, msg: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sequence of length {len} is shorter than the required {need}")]
    TooShort { len: usize, need: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("degenerate encoding (pre-normalization norm vanished)")]
    Degenerate,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{cells} DP cells exceed the full-matrix guard; use the banded variant")]
    SizeGuard { cells: u128 },

    #[error("band {band} is narrower than the length difference {diff}")]
    BandTooNarrow { band: usize, diff: usize },

    #[error("range {start}..{end} is out of bounds for length {len}")]
    OutOfRange { start: usize, end: usize, len: usize },

    #[error("circuit width {width} exceeds the simulator cap of {cap} qubits")]
    WidthOverCap { width: usize, cap: usize },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
