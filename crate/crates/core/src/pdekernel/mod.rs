//! Ball-truncated Green functions: lattice grids, an M-matrix discretization
//! of the operator, implicit time stepping and kernel extraction.

mod assemble;
mod evolve;
mod grid;
mod kernel;
mod monotone;
pub mod sparse;

use thiserror::Error;

pub use assemble::{DiscreteOperator, SCHEME};
pub use evolve::{evolve, evolve_oriented, step_count, step_counts, Orientation, Stepper, TIME_GRID_TOLERANCE};
pub use grid::{BallGrid, GridError, DEFAULT_MEMORY_BUDGET, DIRICHLET};
pub use kernel::{
    default_t_min, green_column, kernel_column, kernel_matrix, point_mass, solve_cauchy, CauchySolution,
    KernelMatrix, KernelOptions,
};
pub use monotone::{monotone_family, MonotoneFamily, MonotonePair};

use crate::operators::OperatorError;
use sparse::SolverError;

#[derive(Debug, Error)]
pub enum PdeError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("grid dimension {grid} does not match operator dimension {operator}")]
    Dimension { grid: usize, operator: usize },
    #[error("coefficients are not finite at {point:?}")]
    NonFinite { point: Vec<f64> },
    #[error("off-diagonal diffusion dominates a_{axis}{axis} at {point:?} (axis weight {weight}); the positive stencil needs diagonal dominance")]
    Dominance { point: Vec<f64>, axis: usize, weight: f64 },
    #[error("time {t} is not a positive integer multiple of the step {dt}")]
    TimeGrid { t: f64, dt: f64 },
    #[error("time {t} is below the minimum {t_min} for delta-seeded kernels")]
    BelowMinimumTime { t: f64, t_min: f64 },
    #[error("times must be non-decreasing")]
    Unordered,
    #[error("vector has length {got}, grid has {expected} nodes")]
    Length { expected: usize, got: usize },
    #[error("source index {index} outside a grid of {nodes} nodes")]
    Source { index: usize, nodes: usize },
    #[error("source point {0:?} is not a grid node")]
    SourceOutside(Vec<f64>),
    #[error("radii must be non-decreasing: {0:?}")]
    Radii(Vec<f64>),
    #[error("nested grids failed to align")]
    Alignment,
    #[error("linear solve failed at step {step}: {source}")]
    Solver {
        step: usize,
        #[source]
        source: SolverError,
    },
    #[error("kernel file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
