use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid base {0}: the base must be at least 2")]
    InvalidBase(u32),

    #[error("zero has an empty expansion and no blocks")]
    ZeroHasNoBlocks,

    #[error("{0} is not a single-nonzero-block integer")]
    NotSingleBlock(String),

    #[error("digit {digit} out of range for base {base}")]
    InvalidDigit { digit: u32, base: u32 },

    #[error("base mismatch: expected {expected}, got {got}")]
    BaseMismatch { expected: u32, got: u32 },

    #[error("tail bound needs at least {needed} atoms, only {available} computed")]
    TailBoundUnavailable { needed: usize, available: usize },

    #[error("tail mass {0:e} too heavy for a certified normal comparison")]
    TailTooHeavy(f64),

    #[error("carry propagation exceeded the depth cap of {cap} digits past position {top}")]
    PropagationCapExceeded { top: usize, cap: usize },

    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),

    #[error("tower level {level} is too small: b^(level+1) must exceed r")]
    LevelTooSmall { level: u32 },

    #[error("insufficient samples: no conditioning event has at least {min_hits} hits out of {samples}")]
    InsufficientSamples { min_hits: u64, samples: u64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cache i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("cache format: {0}")]
    Json(#[from] serde_json::Error),
}
