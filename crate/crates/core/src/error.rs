use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field has {found} samples, grid expects {expected}")]
    GridMismatch { expected: usize, found: usize },

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("degenerate film geometry: min height {min_h:.3e} <= h_min {h_min:.3e}")]
    DegenerateGeometry { min_h: f64, h_min: f64 },

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    SolverNonConvergence { iterations: usize, residual: f64 },

    #[error("coupling iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    CouplingNonConvergence { iterations: usize, residual: f64 },

    #[error("energy increased from {before:.12e} to {after:.12e}")]
    EnergyIncrease { before: f64, after: f64 },

    #[error("test function must have zero mean on the surface (mean {mean:.3e})")]
    NotZeroMean { mean: f64 },

    #[error("energy identity window needs equal steps, got {0:.6e} and {1:.6e}")]
    UnequalSteps(f64, f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed height file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_finite(what: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}
