use thiserror::Error;

/// Errors surfaced by construction, validation and reconstruction entry points.
#[derive(Debug, Error)]
pub enum Error {
    /// Array sizes or shapes do not match what the operation requires.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A scalar parameter is out of its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two objects were built against different projection geometries.
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    /// A convolution cache was built from different data or filters.
    #[error("convolution cache does not match the supplied data and filter bank")]
    CacheMismatch,

    /// The requested prior is not supported by this entry point.
    #[error("unsupported prior: {0}")]
    UnsupportedPrior(String),

    /// The geometry admits no meaningful reconstruction (empty grid, no rays, ...).
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A file did not conform to one of the on-disk formats.
    #[error("bad file format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
