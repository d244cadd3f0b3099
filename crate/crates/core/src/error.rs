use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SzegoError {
    #[error("coefficient {index} is not finite")]
    NonFinite { index: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected at most {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("eigensolver failed: {0}")]
    Eigensolver(String),
    #[error("step size underflow at t = {t} (h = {h})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("non-finite state detected at t = {t}")]
    NanDetected { t: f64 },
    #[error("poles {i} and {j} collide (separation {separation:e}) at t = {t}")]
    PoleCollision { i: usize, j: usize, separation: f64, t: f64 },
    #[error("pole {index} has modulus {modulus} too close to or outside the unit circle at t = {t}")]
    PoleOnCircle { index: usize, modulus: f64, t: f64 },
    #[error("symbol is not in the requested manifold: {0}")]
    NotInManifold(String),
    #[error("recurrence nullspace has dimension {0}, expected 1")]
    RankMismatch(usize),
}

pub type Result<T> = std::result::Result<T, SzegoError>;
