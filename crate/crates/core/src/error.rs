use thiserror::Error;

pub type Result<T> = std::result::Result<T, KavgError>;

#[derive(Debug, Error)]
pub enum KavgError {
    #[error("equilibrium undefined for K < 2 (got K = {0})")]
    EquilibriumUndefined(usize),

    #[error("equilibrium tail truncated: grid half-width {half_width} < {required} (8 sigma_inf)")]
    EquilibriumTruncated { half_width: f64, required: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("density tail truncated: mass {mass:e} outside the inner 80% of the grid exceeds {threshold:e}")]
    TailTruncated { mass: f64, threshold: f64 },

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("convolution accuracy failure: refine grid (clipped mass {clipped:e} > budget {budget:e})")]
    ConvolutionAccuracy { clipped: f64, budget: f64 },

    #[error("grid under-resolves sigma: dx = {dx:e} > sigma/5 = {limit:e}")]
    UnderResolved { dx: f64, limit: f64 },

    #[error("time step too large: lambda*dt = {value} > {limit}")]
    TimeStepTooLarge { value: f64, limit: f64 },

    #[error("absolute continuity violated at x = {0}")]
    AbsoluteContinuity(f64),

    #[error("non-monotone CDF: negative density at x = {0}")]
    NonMonotoneCdf(f64),

    #[error("sample count mismatch: {0} vs {1}")]
    SampleCountMismatch(usize, usize),

    #[error("trajectory error: {0}")]
    Trajectory(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl KavgError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        KavgError::InvalidParameter(msg.into())
    }
}
