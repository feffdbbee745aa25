use thiserror::Error;

/// Errors raised by the tilted-transport toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular value decomposition failed to converge")]
    SvdFailure,

    #[error("time {t} is at or beyond the blow-up time {blowup}")]
    BeyondBlowup { t: f64, blowup: f64 },

    #[error("all singular values are zero")]
    ZeroOperator,

    #[error("chain {chain} diverged at step {step}")]
    Diverged { chain: usize, step: usize },

    #[error("every chain diverged ({0} chains)")]
    AllDiverged(usize),

    #[error("no susceptibility bound available for prior `{0}`")]
    NoChiBound(String),

    #[error("susceptibility supremum not attained inside the search range (field {field})")]
    ChiNotConverged { field: f64 },

    #[error("trace is constant; autocorrelation undefined")]
    ConstantTrace,

    #[error("all importance weights vanish; posterior support missed")]
    WeightCollapse,

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
