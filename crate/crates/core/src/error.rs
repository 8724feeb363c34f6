use thiserror::Error;

use crate::evolve::PicardReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error(
        "initial datum violates the far-wall truncation guard: |g~| at x2=L2 is {clamp:.3e}, \
         max |g~| is {max:.3e} (ratio must stay below 1e-8)"
    )]
    TruncationGuard { clamp: f64, max: f64 },

    #[error("Picard iteration did not converge in {} iterations on a window of length {}", .0.iterates.len(), .0.window)]
    PicardNonConvergence(Box<PicardReport>),

    #[error("Picard iterate left the ball of radius {radius:.3e} (norm {norm:.3e})")]
    PicardBallExceeded { radius: f64, norm: f64 },

    #[error("blow-up guard tripped at step {step} (t = {time}): H2 norm {norm:.3e} exceeds {ceiling:.3e}")]
    BlowUp {
        step: u64,
        time: f64,
        norm: f64,
        ceiling: f64,
    },

    #[error("config error at line {line}: key `{key}`: {reason}")]
    Config {
        key: String,
        line: usize,
        reason: String,
    },

    #[error("too few snapshots: need at least {needed}, got {got}")]
    TooFewSnapshots { needed: usize, got: usize },

    #[error("malformed snapshot file: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Process exit code associated with this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidParameter { .. } | Error::TruncationGuard { .. } => 2,
            Error::NonFinite(_)
            | Error::PicardNonConvergence(_)
            | Error::PicardBallExceeded { .. }
            | Error::BlowUp { .. } => 3,
            _ => 1,
        }
    }
}
