use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite sample {value} at pixel ({i}, {j})")]
    NonFinite { i: usize, j: usize, value: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("symmetric star: Q(psi) is undefined for every direction")]
    SymmetricStar,

    #[error("every projection angle is singular for this star")]
    AllAnglesSingular,

    #[error("too few projection angles ({0}, need at least 8)")]
    TooFewAngles(usize),

    #[error("invalid padding: {0}")]
    InvalidPadding(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("invalid image {path}: {reason}")]
    InvalidImage { path: PathBuf, reason: String },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NotConverged { .. } | Error::AllAnglesSingular)
    }
}
