use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature failed to reach tolerance: estimate {estimate:e}, error {error:e} after {intervals} intervals")]
    Quadrature {
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    #[error("points live on different model spaces: (n={n1}, K={k1}) vs (n={n2}, K={k2})")]
    Mismatch { n1: usize, k1: f64, n2: usize, k2: f64 },

    #[error("tangent vector violates <x,v> = 0 (residual {0:e})")]
    NotTangent(f64),

    #[error("heat kernel mode {mode} is not available for n = {n}")]
    Mode { mode: &'static str, n: usize },

    #[error("kernel integral diverges at d = 0 for alpha = {alpha} <= n/2 = {half_n}")]
    Divergent { alpha: f64, half_n: f64 },

    #[error("Dalang condition violated: alpha = {alpha} must exceed (n-2)/4 = {threshold}")]
    Dalang { alpha: f64, threshold: f64 },

    #[error("regime mismatch: {0}")]
    Regime(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
