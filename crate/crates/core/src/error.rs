use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("momentum range too small: Legendre maximizer at |p| = {p_bound} (x = {x}, v = {v})")]
    MomentumRangeTooSmall { x: f64, v: f64, p_bound: f64 },

    #[error("grid mismatch: {left} nodes vs {right} nodes")]
    GridMismatch { left: usize, right: usize },

    #[error("no stationary solution detected: {0}")]
    NoStationarySolution(String),

    #[error("stationary iteration did not converge by t = {t_max} (last change rate {residual:e})")]
    NotConverged { t_max: f64, residual: f64 },

    #[error("bracket does not straddle c0: {0}")]
    BadBracket(String),

    #[error("probe classifications are not monotone in c: {0}")]
    NonMonotone(String),

    #[error("Newton iteration failed after {iterations} iterations (residual {residual:e})")]
    NewtonFailed { iterations: usize, residual: f64 },

    #[error("no invariant sample found: {0}")]
    NoInvariantSample(String),

    #[error("test function undefined: u <= psi at jet x = {x}")]
    TestFunctionUndefined { x: f64 },

    #[error("window saturated; shorten horizon ({0})")]
    WindowSaturated(String),

    #[error("malformed data: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(v: f64, what: &'static str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(what))
    }
}
