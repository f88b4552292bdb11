//! Independent references: the closed-form heat kernel of the Laplacian and
//! a Feynman-Kac Monte Carlo density estimate for general operators.

mod gaussian;
mod montecarlo;

use thiserror::Error;

pub use gaussian::{gaussian_kernel, smoothed_gaussian_kernel};
pub use montecarlo::{feynman_kac_density, DensityEstimate, MCConfig, BATCH_SIZE, KDE_CUTOFF};

use crate::coeffparse::EvalError;
use crate::operators::OperatorError;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("time must be positive, got {0}")]
    Time(f64),
    #[error("expected points in dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid Monte Carlo settings: {0}")]
    Config(String),
    #[error("2a(x) is not positive definite at {point:?}")]
    Cholesky { point: Vec<f64> },
    #[error("evaluating coefficients at {point:?}: {source}")]
    Eval {
        point: Vec<f64>,
        #[source]
        source: EvalError,
    },
    #[error(transparent)]
    Operator(Box<OperatorError>),
    #[error("path in batch {batch} became non-finite near {point:?}")]
    NonFinitePath { batch: usize, point: Vec<f64> },
}
