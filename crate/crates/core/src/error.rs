use crate::field::Point2;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("field is singular at ({}, {})", .0.x, .0.y)]
    SingularPoint(Point2),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("tube |phi| < {h_tube} contains no grid point at resolution {grid_res}")]
    EmptyTube { h_tube: f64, grid_res: usize },

    #[error("field has no sign change inside the bounding box")]
    EmptyContour,

    #[error("weights: {0}")]
    Weights(String),

    #[error("projection failed at ({}, {}): {reason}", .point.x, .point.y)]
    ProjectionFailed { point: Point2, reason: String },

    #[error("classification: {0}")]
    Classification(String),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("training diverged at step {step}: loss is {loss}")]
    TrainingDiverged { step: usize, loss: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
