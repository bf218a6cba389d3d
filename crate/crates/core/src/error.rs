use thiserror::Error;

use crate::kernel::Regime;
use crate::ode::OdeError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("control u = {u} outside admissible range [{u_min}, {u_max}]")]
    ControlOutOfBounds { u: f64, u_min: f64, u_max: f64 },

    #[error("non-finite state ({m}, {h})")]
    NonFiniteState { m: f64, h: f64 },

    #[error("regime threshold undefined: {0}")]
    ThresholdUndefined(&'static str),

    #[error("operation requires the medium regime, got {0}")]
    NotMedium(Regime),

    #[error("frontier denominator g_m changed sign at m = {m} (value {value})")]
    DenominatorSignChange { m: f64, value: f64 },

    #[error("state ({m}, {h}) lies outside the viability kernel")]
    OutsideKernel { m: f64, h: f64 },

    #[error("trajectories are sampled on different time grids")]
    MismatchedGrids,

    #[error("integration failed: {0}")]
    Integration(#[from] OdeError),

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("{0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
