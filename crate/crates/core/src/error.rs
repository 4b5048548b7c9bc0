use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("bad magic bytes: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("unknown rng id {0}")]
    UnknownRng(u32),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("dimension cap exceeded: {n} steps (max {max})")]
    DimensionCap { n: usize, max: usize },

    #[error("dataset header does not match the supplied physics parameters")]
    HeaderMismatch,

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Divergence { .. } | Error::NonFinite(_))
    }
}
