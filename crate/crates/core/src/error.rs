use thiserror::Error;

#[derive(Debug, Error)]
pub enum LevyError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge: {0}")]
    QuadratureDivergence(String),

    #[error("lattice too coarse for the requested density: {0}")]
    Resolution(String),

    #[error("growth order gamma = {gamma} is not below the moment order beta = {beta}")]
    Growth { gamma: f64, beta: f64 },

    #[error("moment of order {beta} is not finite")]
    MomentDivergence { beta: f64 },

    #[error("input does not decay in the boundary band (ratio {ratio:.3e}); periodization would alias")]
    Alias { ratio: f64 },

    #[error("shifted stencil leaves the grid: {0}")]
    Window(String),

    #[error("growth envelope violated: {0}")]
    Envelope(String),

    #[error("family not supported by this operation: {0}")]
    UnsupportedFamily(String),

    #[error("numerical consistency check failed: {0}")]
    Consistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LevyError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(LevyError::InvalidParameter(msg.into()))
}
