use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("undefined expectation: both +inf and -inf carry positive weight")]
    UndefinedExpectation,

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("utility has no concave majorant: {0}")]
    RejectUnbounded(String),

    #[error("no concavification exists: {0}")]
    NoConcavification(String),

    #[error("dual variable must be nonnegative, got {0}")]
    NegativeDual(f64),

    #[error("budget {x0} is below the minimal cost {min_cost}")]
    Infeasible { x0: f64, min_cost: f64 },

    #[error("multiplier search failed: {0}")]
    NumericalBracketFailure(String),

    #[error("budget is not inside a jump of g: {0}")]
    NotAGap(String),

    #[error("atomic jump cannot be split exactly: {0}")]
    AtomicGap(String),

    #[error("benchmark pair must satisfy b1 > b2, got b1={b1}, b2={b2}")]
    RegimeViolation { b1: f64, b2: f64 },

    #[error("probability constraint unreachable: best {best} < target {target}")]
    ConstraintUnreachable { best: f64, target: f64 },

    #[error("search space of {size} assignments exceeds the limit")]
    SearchSpaceTooLarge { size: f64 },

    #[error("scenario: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Error {
    Error::Invalid {
        what,
        reason: reason.into(),
    }
}
