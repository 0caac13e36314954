//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("index {index} out of range for size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("digit {digit} out of range for base {base}")]
    DigitOutOfRange { digit: usize, base: usize },

    #[error("coordinate {coord} outside domain [{lower}, {upper}]")]
    CoordOutOfDomain { coord: f64, lower: f64, upper: f64 },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("non-conforming einsum at letter '{letter}', core {core}: {detail}")]
    Conformance {
        letter: char,
        core: usize,
        detail: String,
    },

    #[error("invalid einsum spec: {0}")]
    Spec(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("non-finite sample at index {idxs:?}")]
    NonFiniteSample { idxs: Vec<usize> },

    #[error("domain error at index {idxs:?}: {detail}")]
    DomainSample { idxs: Vec<usize>, detail: String },

    #[error("dense expansion of {size} entries exceeds guard of {guard}")]
    SizeGuard { size: usize, guard: usize },

    #[error("invalid guess: {0}")]
    InvalidGuess(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("bad magic bytes {found:?}, expected \"QTTS\"")]
    BadMagic { found: [u8; 4] },

    #[error("file format version {found}, expected {expected}")]
    VersionMismatch { found: u16, expected: u16 },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("metadata error: {0}")]
    Metadata(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("element count mismatch: expected {expected}, found {found}")]
    CountMismatch { expected: usize, found: usize },
}
