use thiserror::Error;

/// Errors raised by ring arithmetic, envelope construction and the checkers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QError {
    #[error("ring mismatch: {0}")]
    RingMismatch(String),
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("not a unit: {0}")]
    NotAUnit(String),
    #[error("not divisible by p: {0}")]
    NotDivisible(String),
    #[error("delta-incoherent assignment: {0}")]
    DeltaIncoherent(String),
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("derivation is not delta-compatible: {0}")]
    NotDeltaCompatible(String),
    #[error("bad beta: {0}")]
    BadBeta(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("bad center: {0}")]
    BadCenter(String),
    #[error("depth exceeded: {0}")]
    DepthExceeded(String),
    #[error("not a complex: {0}")]
    NotAComplex(String),
    #[error("weight cap too small: {0}")]
    WeightCapTooSmall(String),
    #[error("not quasi-nilpotent: {0}")]
    NotQuasiNilpotent(String),
    #[error("augmentation failed: {0}")]
    AugmentationFailed(String),
    #[error("invalid pullback spec: {0}")]
    InvalidPullbackSpec(String),
    #[error("order violation: {0}")]
    OrderViolation(String),
    #[error("host mismatch: {0}")]
    HostMismatch(String),
    #[error("Frobenius relation failed: {0}")]
    FrobeniusRelationFailed(String),
    #[error("not invertible: {0}")]
    NotInvertible(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl QError {
    /// Process exit code used by the CLI for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            QError::PrecisionExhausted(_)
            | QError::BudgetExceeded(_)
            | QError::DepthExceeded(_)
            | QError::WeightCapTooSmall(_) => 3,
            QError::Parse(_)
            | QError::RingMismatch(_)
            | QError::HostMismatch(_)
            | QError::BadCenter(_)
            | QError::InvalidPullbackSpec(_)
            | QError::OrderViolation(_)
            | QError::PreconditionViolated(_)
            | QError::BadBeta(_)
            | QError::NotAUnit(_)
            | QError::NotInvertible(_)
            | QError::DeltaIncoherent(_) => 2,
            _ => 1,
        }
    }
}

pub type QResult<T> = Result<T, QError>;
