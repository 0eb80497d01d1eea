use alloc::string::String;

/// Errors raised by game evaluation, the learner and the reference oracle.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dual variable must be nonnegative (component {index} = {value})")]
    NegativeDual { index: usize, value: f64 },
    #[error("coupled feasible set is empty (smallest violation {violation:e})")]
    Infeasible { violation: f64 },
    #[error("pseudo-gradient is not strongly monotone (estimated modulus {nu:e})")]
    NotStronglyMonotone { nu: f64 },
    #[error("solver did not converge within {iterations} iterations (last update {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("reference methods disagree on the primal by {gap:e} (allowed {allowed:e})")]
    MethodDisagreement { gap: f64, allowed: f64 },
    #[error("non-finite {quantity} at t = {t}: {value}")]
    NonFinite {
        t: usize,
        quantity: &'static str,
        value: f64,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
