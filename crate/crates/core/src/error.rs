use thiserror::Error;

/// Errors surfaced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    /// The feasibility phase could not drive the infeasibility indicator to zero.
    #[error("infeasible scenario (last infeasibility indicator {delta:.3e}): {reason}")]
    InfeasibleScenario { delta: f64, reason: String },

    /// The convexified subproblem was infeasible at its first iteration.
    #[error("subproblem infeasible at the first iteration; a feasible initialization is required")]
    NeedsInitialization,

    #[error("conic solver failure: {0}")]
    NumericalFailure(String),

    #[error("rank reduction stalled: step size fell below {rho:.1e}")]
    StalledRankReduction { rho: f64 },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
