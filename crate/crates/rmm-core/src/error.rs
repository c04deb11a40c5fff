use thiserror::Error;

/// Errors shared by every module in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input that must be finite was NaN or infinite.
    #[error("non-finite input: {0}")]
    NonFinite(f64),

    /// A probability argument left the open interval (0, 1).
    #[error("probability {0} outside the open interval (0, 1)")]
    ProbabilityDomain(f64),

    /// A scanned or optimized function returned NaN/inf at the given abscissa.
    #[error("function evaluation is not finite at x = {x}")]
    NonFiniteEvaluation { x: f64 },

    /// Generic precondition violation with a human-readable description.
    #[error("domain error: {0}")]
    Domain(String),

    /// Operation requires an unexpired pool or option (tau > 0).
    #[error("expired: time to expiry is zero or negative")]
    Expired,

    /// Settlement requested on a pool that has not reached expiry.
    #[error("pool has not expired yet")]
    NotExpired,

    /// A trade would push reserves outside the supported band.
    #[error("trade would push reserves outside the supported band")]
    LiquidityBound,

    /// Straddle budget denominator was non-positive.
    #[error("straddle budget infeasible: cost denominator {0} is not positive")]
    InfeasibleBudget(f64),

    /// A binary short was attempted without the opposite leg.
    #[error("binary shorts require a coincidence of wants: both legs must be shorted together")]
    UnpairedShort,

    /// An option value required for hedge sizing was non-positive.
    #[error("degenerate option value {0}; cannot size hedge")]
    DegenerateOption(f64),

    /// A price path does not span the pool lifetime it is driving.
    #[error("price path does not span the pool lifetime")]
    TimeMismatch,

    /// The hedge plan cannot cover a requested exercise. Reaching this
    /// for an at-the-money plan indicates a logic bug in the caller.
    #[error("hedge plan insufficient: need {needed} options, {available} remain")]
    InsufficientPlan { needed: f64, available: f64 },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
