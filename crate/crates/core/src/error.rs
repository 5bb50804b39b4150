use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented invariant. The message names it.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("aliasing: {points} quadrature points cannot resolve {modes} modes (need at least {needed})")]
    Aliasing {
        modes: usize,
        points: usize,
        needed: usize,
    },

    #[error("rate bound underflows to 0 ({0})")]
    RateUnderflow(String),

    #[error("optimizer failure: {0}")]
    Optimizer(String),

    #[error("implicit solve did not converge after {iterations} iterations (residual {residual:e})")]
    SolverDivergence { iterations: usize, residual: f64 },

    #[error("coupling control |zeta|_E = {norm:e} exceeded cap {cap:e} at t = {time}")]
    ZetaCap { norm: f64, cap: f64, time: f64 },

    #[error("model mismatch: {0}")]
    ModelMismatch(String),

    #[error("no reliable decay window: {0}")]
    EmptyWindow(String),

    #[error("too few traces: got {got}, need at least {need}")]
    TooFewTraces { got: usize, need: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of the numerics (as opposed to invalid input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SolverDivergence { .. }
                | Error::ZetaCap { .. }
                | Error::Optimizer(_)
                | Error::RateUnderflow(_)
        )
    }
}
