use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature of order {requested} is not implemented (supported orders: {supported:?})")]
    UnsupportedOrder { requested: u32, supported: Vec<u32> },

    #[error("point {0:?} lies outside the mesh")]
    PointNotFound([f64; 3]),

    #[error("weight is singular at {0:?}; use a regularization epsilon > 0")]
    SingularEvaluation([f64; 3]),

    #[error("non-integrable sample in A_q quotient on cube centered at {center:?} (side {side}); use epsilon > 0")]
    NonIntegrable { center: [f64; 3], side: f64 },

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("nonlinear iteration did not converge after {iterations} iterations (last increment {last_increment:.3e}): {hint}")]
    NonConvergence {
        iterations: usize,
        last_increment: f64,
        hint: String,
        trace: Box<crate::nonnewtonian::NonlinearSolveTrace>,
    },

    #[error("energy increased after exhausting backtracking at iteration {iteration}")]
    EnergyIncrease { iteration: usize },

    #[error("unknown case `{name}`; valid cases: {valid:?}")]
    UnknownCase { name: String, valid: Vec<&'static str> },

    #[error("study failed at level {level}: {source}")]
    Study {
        level: usize,
        #[source]
        source: Box<Error>,
        partial: Box<crate::harness::StudyReport>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
