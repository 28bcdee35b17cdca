use thiserror::Error;

use crate::linsolve::SolveReport;

#[derive(Debug, Error)]
pub enum HomogError {
    #[error("field not elliptic at x = {x:?} (smallest eigenvalue {eigenvalue})")]
    NotElliptic { x: Vec<f64>, eigenvalue: f64 },

    #[error("periodic reference requires periodic field")]
    NotPeriodic,

    #[error("averaging box exceeds sampling box (L = {l}, R = {r})")]
    AveragingBoxTooLarge { l: f64, r: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time step diverged (stage count too low) at t = {t}")]
    Diverged { t: f64 },

    #[error("linear solver did not converge: {0:?}")]
    SolverFailed(SolveReport),

    #[error("decay floor not reached (ratio {ratio:e}); increase T_long")]
    DecayFloorNotReached { ratio: f64 },

    #[error("non-increasing sample times at index {0}")]
    NonIncreasingTimes(usize),

    #[error("insufficient points in window ({0} usable)")]
    InsufficientPoints(usize),
}

pub type Result<T> = std::result::Result<T, HomogError>;
