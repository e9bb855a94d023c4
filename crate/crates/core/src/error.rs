use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("code length must be in 1..={max} bits, got {bits}")]
    InvalidCodeLength { bits: usize, max: usize },

    #[error("code length mismatch: expected {expected} bits, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("expected {expected} words for the code, got {actual}")]
    WordCount { expected: usize, actual: usize },

    #[error("padding bits beyond bit {bits} are not zero")]
    NonZeroPadding { bits: usize },

    #[error("invalid bit string character {0:?}")]
    InvalidBitChar(char),

    #[error("database holds at most 2^32 codes")]
    TooManyCodes,

    #[error("invalid partition: {0}")]
    InvalidPartition(&'static str),

    #[error("substring index {index} out of range for {m} substrings")]
    SubstringIndex { index: usize, m: usize },

    #[error("substring of {bits} bits is wider than the supported {max}")]
    SubstringTooWide { bits: usize, max: usize },

    #[error("radius {radius} exceeds width {bits}")]
    RadiusTooLarge { radius: u32, bits: u32 },

    #[error("value {value:#x} does not fit in {bits} bits")]
    ValueOutOfRange { value: u64, bits: u32 },

    #[error("k = {k} exceeds database size {n}")]
    KTooLarge { k: usize, n: usize },

    #[error("ratio {0} is outside its valid range")]
    InvalidRatio(f64),

    #[error("substring length {s} does not divide code length {bits}")]
    NotDivisible { bits: u32, s: u32 },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("corrupt table: {0}")]
    CorruptTable(&'static str),
}
