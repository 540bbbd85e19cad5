use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::laplace::LaplaceState;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parameter index {0} out of range (covariance parameters are 0 = variance, 1 = range)")]
    ParameterIndex(usize),
    #[error("index {index} out of range for {len} points")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid input data: {0}")]
    InvalidData(String),
    #[error("locations {0} and {1} coincide")]
    DuplicateLocation(usize, usize),
    #[error("Vecchia factorization failed at point {index} (ordered position {position}): {reason}")]
    Factorization { index: usize, position: usize, reason: String },
    #[error("response outside the likelihood support at indices {0:?}")]
    Support(Vec<usize>),
    #[error("numerical breakdown: {0}")]
    Breakdown(String),
    #[error("unsupported operation: {0}")]
    Capability(String),
    #[error("rank {rank} exceeds dimension {n}")]
    Rank { rank: usize, n: usize },
    #[error("matrix is not positive semi-definite: updated diagonal {value} at pivot step {step}")]
    NotPsd { step: usize, value: f64 },
    #[error("Newton iteration did not converge after {} iterations", .0.newton_iters)]
    NewtonConvergence(Box<LaplaceState>),
    #[error("problem too large: {0}")]
    Capacity(String),
    #[error("score undefined: {0}")]
    Score(String),
    #[error("estimation failed: {0}")]
    Estimation(String),
}

impl Error {
    /// True for failures caused by the numbers rather than by the inputs' shape or support.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Factorization { .. }
                | Error::Breakdown(_)
                | Error::NotPsd { .. }
                | Error::NewtonConvergence(_)
                | Error::Score(_)
                | Error::Estimation(_)
        )
    }
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
