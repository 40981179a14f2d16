use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// Φ⁻¹ is unbounded at 0 and 1; callers decide how to clamp.
    #[error("normal quantile is infinite at p = {p}")]
    InfiniteQuantile { p: f64 },

    #[error("no epsilon in [0, {max}] reaches delta = {delta} at mu = {mu}")]
    EpsilonOutOfRange { mu: f64, delta: f64, max: f64 },

    #[error("noise calibration failed: {0}")]
    Calibration(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numerical divergence{}", match .iteration { Some(t) => format!(" at iteration {t}"), None => String::new() })]
    Divergence { iteration: Option<usize> },

    #[error("{path}: parse error at byte offset {offset}: {message}")]
    Parse {
        path: String,
        offset: u64,
        message: String,
    },

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    InvalidConfig(Vec<String>),

    #[error("{0}")]
    Campaign(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
