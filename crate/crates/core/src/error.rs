use thiserror::Error;

/// Errors raised by the model, the simulators and the estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    /// Initiation and elongation rates of an rRNA type are exactly equal, so the
    /// type is neither in the exponential nor in the stationary regime.
    #[error("rRNA type {rrna} has alpha_r / beta_r exactly equal to 1")]
    BoundaryRatio { rrna: usize },

    #[error("absorbing state: total transition rate is zero")]
    Absorbing,

    #[error("event budget of {budget} events exhausted at t = {time}")]
    BudgetExceeded { budget: u64, time: f64 },

    #[error("stop condition {0} does not apply to this model")]
    UnsupportedCondition(&'static str),

    #[error("time {time} lies outside the trajectory range [0, {end}]")]
    OutOfRange { time: f64, end: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ODE solution left its admissible region at t = {time}: {reason}")]
    Singularity { time: f64, reason: String },

    #[error("empty window or zero total dwell time")]
    EmptyWindow,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
