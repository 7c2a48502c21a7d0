use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("capacity exceeded: {0}")]
    CapacityExceeded(String),
    #[error("no convergent in range: {0}")]
    NoConvergentInRange(String),
    #[error("placement failed after {attempts} attempts")]
    PlacementFailed { attempts: usize },
    #[error("empty class: {0}")]
    EmptyClass(String),
    #[error("small divisor |Omega| = {value:e} below {bound:e}")]
    SmallDivisor { value: f64, bound: f64 },
    #[error("radius exceeded: |w| = {norm:e} > {limit:e}")]
    RadiusExceeded { norm: f64, limit: f64 },
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("cascade not found: {0}")]
    CascadeNotFound(String),
    #[error("support violation: mode ({0}, {1}) outside truncation")]
    SupportViolation(i64, i64),
    #[error("infeasible regime: {0}")]
    InfeasibleRegime(String),
    #[error("config error: {0}")]
    ConfigError(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage { stage: String, source: Box<Error> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
