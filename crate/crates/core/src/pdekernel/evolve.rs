use super::assemble::DiscreteOperator;
use super::sparse::{bicgstab, Csr, SolverSettings};
use super::PdeError;

/// Relative slack when matching a time to a multiple of the step.
pub const TIME_GRID_TOLERANCE: f64 = 1e-9;

/// Which way the implicit step is applied.
///
/// `Forward` solves `B u' = u` and evolves functions of the first kernel
/// argument; `Transposed` solves `B^T v' = v` and evolves densities in the
/// second argument (the adjoint problem).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Forward,
    Transposed,
}

/// Number of steps of size `dt` that make up `t`.
pub fn step_count(t: f64, dt: f64) -> Result<usize, PdeError> {
    if !(t > 0.0 && dt > 0.0 && t.is_finite() && dt.is_finite()) {
        return Err(PdeError::TimeGrid { t, dt });
    }
    let k = (t / dt).round();
    if k < 1.0 || (k * dt - t).abs() > TIME_GRID_TOLERANCE * t {
        return Err(PdeError::TimeGrid { t, dt });
    }
    Ok(k as usize)
}

pub fn step_counts(times: &[f64], dt: f64) -> Result<Vec<usize>, PdeError> {
    times.iter().map(|&t| step_count(t, dt)).collect()
}

/// Implicit step matrix in one orientation, ready for repeated solves.
#[derive(Debug, Clone)]
pub struct Stepper {
    matrix: Csr,
    dt: f64,
    settings: SolverSettings,
}

impl Stepper {
    pub fn new(op: &DiscreteOperator, dt: f64, orientation: Orientation) -> Stepper {
        let b = op.step_matrix(dt);
        let matrix = match orientation {
            Orientation::Forward => b,
            Orientation::Transposed => b.transpose(),
        };
        Stepper { matrix, dt, settings: SolverSettings::default() }
    }

    pub fn with_settings(mut self, settings: SolverSettings) -> Stepper {
        self.settings = settings;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn matrix(&self) -> &Csr {
        &self.matrix
    }

    /// One implicit step, warm-started from the current state.
    pub fn step(&self, v: &[f64], index: usize) -> Result<Vec<f64>, PdeError> {
        let mut next = v.to_vec();
        bicgstab(&self.matrix, v, &mut next, self.settings).map_err(|source| PdeError::Solver { step: index, source })?;
        Ok(next)
    }

    /// States after each requested number of steps (must be non-decreasing).
    pub fn run(&self, v0: &[f64], checkpoints: &[usize]) -> Result<Vec<Vec<f64>>, PdeError> {
        let mut out = Vec::with_capacity(checkpoints.len());
        let mut v = v0.to_vec();
        let mut done = 0;
        for &target in checkpoints {
            if target < done {
                return Err(PdeError::Unordered);
            }
            while done < target {
                v = self.step(&v, done + 1)?;
                done += 1;
            }
            out.push(v.clone());
        }
        Ok(out)
    }
}

/// Evolves `v0` to time `t` in `steps` implicit steps.
pub fn evolve(op: &DiscreteOperator, v0: &[f64], t: f64, steps: usize) -> Result<Vec<f64>, PdeError> {
    evolve_oriented(op, v0, t, steps, Orientation::Forward)
}

pub fn evolve_oriented(
    op: &DiscreteOperator,
    v0: &[f64],
    t: f64,
    steps: usize,
    orientation: Orientation,
) -> Result<Vec<f64>, PdeError> {
    if steps == 0 || !(t > 0.0) {
        return Err(PdeError::TimeGrid { t, dt: t / steps as f64 });
    }
    if v0.len() != op.len() {
        return Err(PdeError::Length { expected: op.len(), got: v0.len() });
    }
    let stepper = Stepper::new(op, t / steps as f64, orientation);
    Ok(stepper.run(v0, &[steps])?.pop().expect("one checkpoint"))
}
