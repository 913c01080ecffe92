use alloc::string::String;

use crate::provider::ProviderError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("frame too small: {width}x{height}, need at least {min}x{min}")]
    FrameTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("unsupported aggregation: {0}")]
    UnsupportedAggregation(String),
    #[error("provider error: {0}")]
    Provider(#[from] ProviderError),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn check_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
        if expected == actual {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, actual })
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
