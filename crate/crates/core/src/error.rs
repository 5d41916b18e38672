use thiserror::Error;

/// Errors raised by the welfare engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("action set is empty")]
    EmptyActionSet,
    #[error("duplicate action label `{0}`")]
    DuplicateAction(String),
    #[error("population has no utility types")]
    EmptyPopulation,
    #[error("type {index}: expected {expected} utilities, found {found}")]
    LengthMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("type {index}: utility for action {action} is not finite")]
    NonFiniteUtility { index: usize, action: usize },
    #[error("type {index}: weight {weight} must be positive and finite")]
    InvalidWeight { index: usize, weight: f64 },
    #[error("choice set is empty")]
    EmptyChoiceSet,
    #[error("action index {index} out of range for {len} actions")]
    ActionOutOfRange { index: usize, len: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("too many actions for exhaustive enumeration: {0} (limit 20)")]
    TooManyActions(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("threshold structure violated: need u(0,A) > u(0,B) and u(1,B) > u(1,A)")]
    ThresholdStructure,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Accepts `p` when it lies in `[0, 1]`.
pub(crate) fn check_probability(name: &'static str, p: f64) -> Result<f64> {
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(invalid(name, format!("{p} is not a probability")))
    }
}

/// Accepts a non-negative vector summing to one within `tol`.
pub(crate) fn check_distribution(name: &'static str, probs: &[f64], tol: f64) -> Result<()> {
    if probs.is_empty() {
        return Err(invalid(name, "empty probability vector"));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(invalid(name, "entries must be finite and non-negative"));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > tol {
        return Err(invalid(name, format!("entries sum to {total}, expected 1")));
    }
    Ok(())
}
