use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = CoreError> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoreError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("point {index} has {available} neighbors but {required} are needed; increase k_max")]
    NotEnoughNeighbors {
        index: usize,
        available: usize,
        required: usize,
    },

    #[error("degenerate stencil at point {index}: mass density is zero")]
    DegenerateStencil { index: usize },

    #[error("tangent estimation failed at point {index}: covariance rank below {dim} and no previous tangent")]
    DegenerateTangent { index: usize, dim: usize },

    #[error("linear solver did not converge after {iterations} iterations (residual {residual:e})")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations; position changes: {trace:?}")]
    FixedPointDiverged { iterations: usize, trace: Vec<f64> },

    #[error("non-finite value in solution at point {index}")]
    NonFinite { index: usize },

    #[error("time {time} is past the extinction time {extinction}")]
    PastExtinction { time: f64, extinction: f64 },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("barrier precondition unmet: initial max x.nu = {max} exceeds mu = {mu}")]
    BarrierPrecondition { max: f64, mu: f64 },
}
