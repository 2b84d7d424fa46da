use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed input: {0}")]
    Parse(String),
    #[error("empty space")]
    EmptySpace,
    #[error("weight {index} is not strictly positive ({value})")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("explicit metric is not symmetric at ({i}, {j})")]
    AsymmetricMetric { i: usize, j: usize },
    #[error("distinct points {i} and {j} are at distance zero")]
    ZeroDistance { i: usize, j: usize },
    #[error("nonzero self distance at point {0}")]
    NonZeroDiagonal(usize),
    #[error("unknown point {0}")]
    UnknownPoint(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("strict geometry violated: {0}")]
    StrictGeometry(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("missing data: {0}")]
    MissingData(String),
    #[error("{what} violated by {max_abs:e}")]
    IdentityViolation { what: String, max_abs: f64 },
    #[error("remainder norm {rho} is not below 1; raise N (and j0 for discrete formulae)")]
    Divergent { rho: f64 },
    #[error("format version {found} not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
