use std::path::PathBuf;

use thiserror::Error;

use crate::measure::FluxProfile;

/// Every fallible operation in the crate reports through this type.
#[derive(Debug, Error)]
pub enum CmlError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point ({x}, {y}) lies outside the chart")]
    OutsideChart { x: f64, y: f64 },

    #[error("no solution: torus with these weights has Euler characteristic {chi} >= 0 and the curvature target is non-positive")]
    InfeasibleTopology { chi: f64 },

    #[error("Newton iteration stalled after {iterations} iterations (residual {residual:.3e}, floor {floor:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        floor: f64,
    },

    #[error("Jacobian lost positive definiteness during the linear solve")]
    IndefiniteJacobian,

    #[error("continuation stage {stage} failed: {source}")]
    StageFailure {
        stage: usize,
        #[source]
        source: Box<CmlError>,
    },

    #[error("flux did not stabilize over {} dyadic radii", profile.len())]
    Inconclusive { profile: FluxProfile },

    #[error("quadrature failed to reach tolerance: {0}")]
    Quadrature(String),

    #[error("malformed grid file {path}: {reason}")]
    GridFormat { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CmlError>;

pub(crate) fn invalid(msg: impl Into<String>) -> CmlError {
    CmlError::InvalidInput(msg.into())
}
