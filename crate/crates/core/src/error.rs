use thiserror::Error;

/// Library-wide error type. Assertion variants carry the stage name and,
/// where available, a JSON dump of the offending instance so failures are
/// reproducible.
#[derive(Debug, Error)]
pub enum AtspError {
    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("graph is not strongly connected; no feasible tour")]
    NotStronglyConnected,

    #[error("degree imbalance at vertices {0:?}")]
    DegreeImbalance(Vec<usize>),

    #[error("linear program infeasible: {0}")]
    LpInfeasible(String),

    #[error("linear program unbounded")]
    LpUnbounded,

    #[error("flow infeasible; violated cut: {0:?}")]
    FlowInfeasible(Vec<usize>),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("not a crossing pair")]
    NotCrossing,

    #[error("inconsistent primal/dual: {0}")]
    InconsistentDual(String),

    #[error("instance violation: {0}")]
    InstanceViolation(String),

    #[error("not a vertebrate pair: {0}")]
    NotVertebrate(String),

    #[error("oracle contract breach: {0}")]
    OracleContract(String),

    #[error("unreachable inside restricted set: {0}")]
    Unreachable(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("internal assertion failed at stage `{stage}`: {detail}")]
    Assertion {
        stage: String,
        detail: String,
        /// JSON dump of the instance being processed, when one was in scope.
        dump: Option<String>,
    },
}

pub type Result<T> = std::result::Result<T, AtspError>;

/// Internal invariant check that produces a reproducible error instead of a
/// panic. Used for every bound the algorithm proves along the way.
#[macro_export]
macro_rules! ensure_stage {
    ($cond:expr, $stage:expr, $($arg:tt)*) => {
        if !($cond) {
            return Err($crate::error::AtspError::Assertion {
                stage: $stage.to_string(),
                detail: format!($($arg)*),
                dump: None,
            });
        }
    };
}
