use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("matrix has a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid dither state: {0}")]
    InvalidState(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("stream policy {found} does not match estimator (expected {expected})")]
    PolicyMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("sample {index} carries no usable dither scale")]
    MissingScale { index: usize },
    #[error("mask entry ({row}, {col}) = {value} outside [0, 1]")]
    MaskRange { row: usize, col: usize, value: f64 },
    #[error("mask is not symmetric at ({row}, {col})")]
    MaskAsymmetric { row: usize, col: usize },
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported stream format version {0}")]
    UnsupportedVersion(u16),
    #[error("stream truncated at byte {0}")]
    TruncatedStream(usize),
    #[error("malformed stream: {0}")]
    InvalidStream(&'static str),
}
