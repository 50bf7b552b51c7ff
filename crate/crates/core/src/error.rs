use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("clamping moved {mass:.4} of the probability mass to s = 1 (limit 0.01); scale is miscalibrated")]
    ExcessClamping { mass: f64 },

    #[error("correlated monotonicity violated: phi decreases between s = {s_lo} and s = {s_hi}")]
    NonMonotoneInfectiousness { s_lo: f64, s_hi: f64 },

    #[error("profile has no atom with s * phi > 0")]
    NoTransmission,

    #[error("target R0 {target} is unreachable with values in [0, 1]; maximal achievable R0 is {max_r0}")]
    CalibrationInfeasible { target: f64, max_r0: f64 },

    #[error("at step {step} an atom with s = {s} exceeds the total susceptibility {total}")]
    DominatingNode { step: u64, s: f64, total: f64 },

    #[error("susceptible pool too small to step: remaining = {remaining}")]
    PoolExhausted { remaining: u64 },

    #[error("states are defined over different atom grids ({left} vs {right} atoms)")]
    GridMismatch { left: usize, right: usize },

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("enumeration supports at most {max} nodes, got {count}")]
    TooManyNodes { count: usize, max: usize },

    #[error("cannot vaccinate {requested} individuals, at most {available} available")]
    TooManyVaccines { requested: u64, available: u64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
