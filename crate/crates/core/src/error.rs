use thiserror::Error;

use crate::tensor::ModeSubset;

/// Errors raised by the geometry toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The zero tensor has no minimal subspaces of positive dimension.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("operator is not in the requested space (residual {residual:.3e})")]
    NotInSpace { residual: f64 },

    #[error("tensor is not on the fixed-rank set: {0}")]
    NotOnManifold(String),

    /// The graph matrix `Uᵗ B` for block `alpha` is singular or badly conditioned.
    #[error("outside chart domain at block {alpha}: condition number {condition:.3e}")]
    OutsideChartDomain { alpha: ModeSubset, condition: f64 },

    /// The tensor is on the manifold but not in the image of the tree chart.
    #[error("outside the tree chart neighbourhood at level {level} (residual {residual:.3e})")]
    OutsideChartImage { level: usize, residual: f64 },

    #[error("invalid core tensor: {0}")]
    InvalidCore(String),

    #[error("inadmissible rank tuple: {}", .0.join("; "))]
    Inadmissible(Vec<String>),

    #[error("generation failed: {0}")]
    GenerationFailure(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("finite-difference oracle unstable: {0}")]
    OracleUnstable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
