use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("interface pairing failed: {0}")]
    PairingFailure(String),

    #[error("non-finite energy density in cell {cell}")]
    NonfiniteEnergy { cell: usize },

    #[error("linear solve failed at Newton iteration {iteration}: {reason}")]
    LinearSolveFailure { iteration: usize, reason: String },

    #[error("Newton iteration diverged after {iterations} iterations (energy increased on {increases} consecutive steps)")]
    Divergence { iterations: usize, increases: usize },

    #[error("Newton iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("condition number estimation failed: {0}")]
    EstimationFailure(String),

    #[error("solve failed on mesh level n={n}: {source}")]
    LevelFailure {
        n: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
