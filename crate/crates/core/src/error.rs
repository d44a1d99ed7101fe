use thiserror::Error;

/// Errors produced by the solvers, oracles and experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ECIM diverged at iteration {iteration} (energy {energy})")]
    Diverged { iteration: usize, energy: f64 },

    #[error("degenerate model: predicted reduction {0:e} is not usable")]
    DegenerateModel(f64),

    #[error("capability exceeded: {0}")]
    Capability(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("insufficient data: {usable} usable points, need at least {required}")]
    InsufficientData { usable: usize, required: usize },

    #[error("non-finite objective value at {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
