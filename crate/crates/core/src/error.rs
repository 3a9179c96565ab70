//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("integer overflow in affine arithmetic")]
    Overflow,

    #[error("iterator `{0}` is unbounded under the given parameter bindings")]
    Unbounded(String),

    #[error("unbound parameter `{0}`")]
    UnboundParameter(String),

    #[error("line {line}: {message}")]
    SpecParse { line: usize, message: String },

    #[error("cloog input line {line}: {message}")]
    CloogParse { line: usize, message: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("scattering is not a pure permutation of the iterators; unsupported scattering")]
    UnsupportedScattering,

    #[error("tiling band is illegal: dependence {dep:?} has negative component in `{dim}`")]
    IllegalBand { dep: Vec<i64>, dim: String },

    #[error("time tile size {tile} exceeds time buffer {buffer}")]
    BufferViolation { tile: u64, buffer: u64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "read of cell t={time} {coords:?} before it was produced \
         (slot holds {found})"
    )]
    StaleRead {
        time: i64,
        coords: Vec<i64>,
        found: String,
    },

    #[error("grid i/o: {0}")]
    GridFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
