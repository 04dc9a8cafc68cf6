use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid code dimensions: n={n}, k={k} (need 0 < k < n)")]
    InvalidDimensions { n: usize, k: usize },

    #[error("length mismatch: expected {expected} bits, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("unsupported constellation order {0} (need a square even power of two >= 16)")]
    InvalidOrder(usize),

    #[error("word length {len} is not a multiple of {bits_per_symbol} bits per symbol")]
    NotSymbolAligned { len: usize, bits_per_symbol: usize },

    #[error("label {0} is not valid for this constellation")]
    UnknownLabel(String),

    #[error("fading coefficient is zero")]
    ZeroFading,

    #[error("noise spectral density must be positive, got {0}")]
    InvalidNoise(f64),

    #[error("invalid structure [{l1} {l2}] for L={l}")]
    InvalidStructure { l1: usize, l2: usize, l: usize },

    #[error("SNR grid must be non-empty and ascending")]
    InvalidGrid,

    #[error("code redundancy n-k={0} exceeds the decoder's 128-bit syndrome width")]
    RedundancyTooLarge(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
