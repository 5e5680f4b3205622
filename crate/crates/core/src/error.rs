use std::path::PathBuf;

use thiserror::Error;

use crate::descent::DescentTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, got {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("region is empty")]
    EmptyRegion,

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("solve failed for region {region}: {source}")]
    Region {
        region: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("descent failed at iteration {iteration}: {source}")]
    Descent {
        iteration: usize,
        #[source]
        source: Box<Error>,
        trace: Box<DescentTrace>,
    },

    #[error("time {t} outside the valid range [{min}, {max}]")]
    OutOfRange { t: f64, min: f64, max: f64 },

    #[error("input has nonzero mean {mean:e}; the zero frequency has no finite transfer")]
    NonZeroMean { mean: f64 },

    #[error("site ({x}, {y}) is not on a boundary between regions {from} and {to}")]
    NotOnBoundary {
        x: usize,
        y: usize,
        from: usize,
        to: usize,
    },

    #[error("region has no usable texture (intensity variance {variance:e}); motion is unreliable")]
    DegenerateRegion { variance: f64 },

    #[error("missing gradient for region {0}")]
    MissingGradient(usize),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn in_region(self, region: usize) -> Self {
        Error::Region {
            region,
            source: Box::new(self),
        }
    }
}
