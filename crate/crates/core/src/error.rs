use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NpdError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("fields live on different grids or have mismatched shapes")]
    ShapeMismatch,

    #[error("source is not neutral: mean {mean:e} exceeds tolerance {tolerance:e}")]
    NonNeutralSource { mean: f64, tolerance: f64 },

    #[error("non-finite value produced at t = {time}")]
    NonFinite { time: f64 },

    #[error("concentration undershoot {min:e} below floor {floor:e} at t = {time}")]
    NegativityBreach { time: f64, min: f64, floor: f64 },

    #[error("stopped after {steps} steps at t = {time} before reaching t_end = {t_end}")]
    TimeoutIncomplete { steps: usize, time: f64, t_end: f64 },

    #[error("decay fit precondition failed: {0}")]
    FitPrecondition(String),

    #[error("trajectories have different output times or shapes")]
    MismatchedTrajectories,

    #[error("tangent set became numerically singular at t = {time} (condition {condition:e})")]
    UnderResolved { time: f64, condition: f64 },

    #[error("scenario rejected: {0}")]
    InvalidScenario(String),
}

pub type Result<T, E = NpdError> = std::result::Result<T, E>;
