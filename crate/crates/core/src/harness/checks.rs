//! Kernel-level verifications. Each returns report rows; none of them panic
//! on a violated bound.

use std::collections::VecDeque;
use std::sync::Arc;

use thiserror::Error;

use super::report::{CheckRecord, Witness};
use crate::constants::ConstantsBundle;
use crate::operators::{adjoint, approximate, cutoff_eta, halton_ball, validate, Floors, OperatorError, OperatorSpec};
use crate::oracles::{feynman_kac_density, MCConfig, OracleError};
use crate::pdekernel::sparse::Csr;
use crate::pdekernel::{
    kernel_matrix, monotone_family, step_count, step_counts, BallGrid, DiscreteOperator, KernelMatrix,
    KernelOptions, Orientation, PdeError, Stepper,
};

/// Relative scale for exact discrete identities.
pub const IDENTITY_TOLERANCE: f64 = 1e-8;
/// Slack on the squared-norm bounds.
pub const L2_SLACK: f64 = 0.1;
/// `h^N sum |(L_{A*} - L_A^T) phi|` stays below this times `h` on the
/// reference operators. Measured ratios at h = 0.5, 0.25 on B(0, 4): zero for
/// the Laplacian, 3 pi for Ornstein-Uhlenbeck, 33.8 for the cubic drift;
/// frozen at 1.5x the largest.
pub const ADJOINT_REGRESSION_CONSTANT: f64 = 51.0;
/// Number of points for the cutoff-coefficient sample.
pub const CUTOFF_SAMPLE: usize = 1000;

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("{0}")]
    Precondition(String),
}

/// Witness `(x, y, t)` for source `s` and node `node` of an oriented kernel.
fn kernel_witness(kernel: &KernelMatrix, s: usize, node: usize, t: f64) -> Witness {
    let src = kernel.grid().point(kernel.sources()[s]);
    let other = kernel.grid().point(node);
    match kernel.orientation() {
        Orientation::Transposed => Witness::at(Some(src), Some(other), Some(t)),
        Orientation::Forward => Witness::at(Some(other), Some(src), Some(t)),
    }
}

fn argmax(v: &[f64]) -> (usize, f64) {
    v.iter().enumerate().fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
}

fn argmin(v: &[f64]) -> (usize, f64) {
    v.iter().enumerate().fold((0, f64::INFINITY), |(bi, bv), (i, &x)| if x < bv { (i, x) } else { (bi, bv) })
}

/// Pointwise bound `C_main e^(gamma t) t^(-N/2)` at every stored value.
///
/// Tolerance is `tolerance` times the bound at the tightest time.
pub fn check_nash_bound(kernel: &KernelMatrix, constants: &ConstantsBundle, tolerance: f64) -> CheckRecord {
    let mut worst: Option<(f64, f64, f64, usize, usize, usize)> = None;
    for s in 0..kernel.sources().len() {
        for (k, &t) in kernel.times().iter().enumerate() {
            let bound = constants.pointwise_bound(t);
            let (node, observed) = argmax(kernel.slice(s, k));
            let rel = (bound - observed) / bound;
            if worst.is_none_or(|w| rel < w.0) {
                worst = Some((rel, observed, bound, s, k, node));
            }
        }
    }
    let Some((rel, observed, bound, s, k, node)) = worst else {
        return CheckRecord::gate("nash", "pointwise Gaussian-type bound", f64::NAN, 0.0).note("empty kernel");
    };
    let t = kernel.times()[k];
    CheckRecord::gate("nash", "pointwise Gaussian-type bound", bound - observed, tolerance * bound)
        .constant("C_main", constants.c_main)
        .values(observed, bound)
        .witness(kernel_witness(kernel, s, node, t))
        .note(format!("bound/observed = {:.4} at the tightest point (relative margin {rel:.4})", bound / observed))
}

/// Total mass of every column against `e^(-H0 t)` (second-argument columns)
/// or `e^(-H0* t)` (first-argument columns).
pub fn check_mass(kernel: &KernelMatrix, floors: &Floors) -> Vec<CheckRecord> {
    let floor = match kernel.orientation() {
        Orientation::Transposed => floors.h0,
        Orientation::Forward => floors.h0_star,
    };
    let mut rows = Vec::new();
    let mut evaluate = |rate: f64, name: &str, tag: &str| {
        let mut worst: Option<(f64, f64, f64, usize, usize)> = None;
        let mut degenerate = false;
        for s in 0..kernel.sources().len() {
            for (k, &t) in kernel.times().iter().enumerate() {
                let mass = kernel.mass(s, k);
                degenerate |= !(mass > 0.0);
                let bound = (-rate * t).exp();
                let margin = bound - mass;
                if worst.is_none_or(|w| margin / bound < w.0 / w.2) {
                    worst = Some((margin, mass, bound, s, k));
                }
            }
        }
        let (margin, mass, bound, s, k) = worst.expect("non-empty kernel");
        let t = kernel.times()[k];
        let mut row = CheckRecord::gate(name, tag, margin, IDENTITY_TOLERANCE * bound.max(1.0))
            .constant("floor", rate)
            .values(mass, bound)
            .witness(Witness::at(Some(kernel.grid().point(kernel.sources()[s])), None, Some(t)));
        row = row.require(!degenerate, "a kernel column has no mass (internal inconsistency)");
        rows.push(row);
    };
    evaluate(floor.value, "mass", "sub-Markov mass bound");
    if floor.is_clamped() {
        evaluate(floor.raw, "mass_unclamped", "mass bound with the unclamped floor");
        let last = rows.pop().expect("row pushed");
        rows.push(last.informational().note("informational: the floor was clamped to 0"));
    }
    rows
}

/// Structural facts about the implicit step matrix that imply a strictly
/// positive inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MMatrixCertificate {
    pub nonpositive_off_diagonal: bool,
    pub positive_diagonal: bool,
    pub strictly_row_dominant: bool,
    pub irreducible: bool,
}

impl MMatrixCertificate {
    pub fn holds(&self) -> bool {
        self.nonpositive_off_diagonal && self.positive_diagonal && self.strictly_row_dominant && self.irreducible
    }
}

fn reaches_all(m: &Csr) -> bool {
    let n = m.n();
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = queue.pop_front() {
        for (j, v) in m.row(i) {
            if v != 0.0 && !seen[j] {
                seen[j] = true;
                count += 1;
                queue.push_back(j);
            }
        }
    }
    count == n
}

pub fn m_matrix_certificate(b: &Csr) -> MMatrixCertificate {
    let mut off = true;
    let mut diag = true;
    let mut dominant = true;
    for i in 0..b.n() {
        let mut d = 0.0;
        let mut rest = 0.0;
        for (j, v) in b.row(i) {
            if i == j {
                d = v;
            } else {
                off &= v <= 0.0;
                rest += v.abs();
            }
        }
        diag &= d > 0.0;
        dominant &= d > rest;
    }
    MMatrixCertificate {
        nonpositive_off_diagonal: off,
        positive_diagonal: diag,
        strictly_row_dominant: dominant,
        irreducible: reaches_all(b) && reaches_all(&b.transpose()),
    }
}

/// Numerical floor `min >= -1e-10 max` plus the M-matrix certificate, which
/// makes every entry of the inverse strictly positive after a single step.
pub fn check_positivity(op: &DiscreteOperator, kernel: &KernelMatrix, dt: f64) -> CheckRecord {
    let cert = m_matrix_certificate(&op.step_matrix(dt));
    let scale = kernel.max_value();
    let mut worst = (f64::INFINITY, 0, 0, 0);
    let mut nonpositive = 0usize;
    for s in 0..kernel.sources().len() {
        for k in 0..kernel.times().len() {
            let slice = kernel.slice(s, k);
            nonpositive += slice.iter().filter(|v| **v <= 0.0).count();
            let (node, v) = argmin(slice);
            if v < worst.0 {
                worst = (v, s, k, node);
            }
        }
    }
    let (min, s, k, node) = worst;
    CheckRecord::gate("positivity", "positivity of the kernel", min, 1e-10 * scale)
        .values(min, 0.0)
        .witness(kernel_witness(kernel, s, node, kernel.times()[k]))
        .require(cert.holds(), "step matrix is not an irreducible, row-dominant M-matrix")
        .note(format!("M-matrix certificate {cert:?}; {nonpositive} stored values <= 0"))
}

/// `h^N sum_z p(x,z,t) p(z,y,s)` against `p(x,y,t+s)` for all source pairs.
pub fn check_chapman_kolmogorov(
    op: &DiscreteOperator,
    sources: &[usize],
    t: f64,
    s: f64,
    opts: &KernelOptions,
) -> Result<CheckRecord, CheckError> {
    for time in [t, s, t + s] {
        step_count(time, opts.dt).map_err(|_| {
            CheckError::Precondition(format!("({t}, {s}) is incompatible with the step {}", opts.dt))
        })?;
    }
    let rows = kernel_matrix(op, sources, &[t, t + s], opts, Orientation::Transposed)?;
    let cols = kernel_matrix(op, sources, &[s], opts, Orientation::Forward)?;
    let cell = op.grid().cell_volume();
    let scale = rows.max_value().max(cols.max_value());
    let mut worst = (0.0f64, 0, 0);
    for xi in 0..sources.len() {
        let row = rows.slice(xi, 0);
        for (yi, &y) in sources.iter().enumerate() {
            let col = cols.slice(yi, 0);
            let composed: f64 = cell * row.iter().zip(col).map(|(a, b)| a * b).sum::<f64>();
            let direct = rows.slice(xi, 1)[y];
            let defect = (composed - direct).abs();
            if defect > worst.0 {
                worst = (defect, xi, yi);
            }
        }
    }
    let grid = op.grid();
    let allowed = IDENTITY_TOLERANCE * scale;
    Ok(CheckRecord::gate(&format!("chapman_kolmogorov_{t}_{s}"), "semigroup composition", allowed - worst.0, 0.0)
        .values(worst.0, allowed)
        .witness(Witness::at(Some(grid.point(sources[worst.1])), Some(grid.point(sources[worst.2])), Some(t + s))))
}

/// `h^N sum |(L_{A*} - L_A^T) phi|` with `phi = exp(-|x|^2)`.
pub fn adjoint_consistency_metric(spec: &OperatorSpec, op: &DiscreteOperator) -> Result<f64, CheckError> {
    let adj = DiscreteOperator::assemble(&adjoint(spec)?, op.grid().clone())?;
    let grid = op.grid();
    let phi: Vec<f64> = (0..grid.len()).map(|i| (-grid.squared_norm(i)).exp()).collect();
    let a = adj.generator().matvec(&phi);
    let b = op.generator().transpose().matvec(&phi);
    Ok(grid.cell_volume() * a.iter().zip(&b).map(|(u, v)| (u - v).abs()).sum::<f64>())
}

/// Transpose route, continuous-adjoint assembly route, and the sup bound for
/// the adjoint problem started from `f = 1`.
pub fn check_duality(
    spec: &OperatorSpec,
    op: &DiscreteOperator,
    transposed: &KernelMatrix,
    forward: &KernelMatrix,
    opts: &KernelOptions,
) -> Result<Vec<CheckRecord>, CheckError> {
    if transposed.sources() != forward.sources() || transposed.times() != forward.times() {
        return Err(CheckError::Precondition("duality needs both orientations on the same sources and times".into()));
    }
    let grid = op.grid();
    let sources = transposed.sources();
    let scale = transposed.max_value().max(forward.max_value());
    let mut worst = (0.0f64, 0, 0, 0);
    for k in 0..transposed.times().len() {
        for (xi, &x) in sources.iter().enumerate() {
            for (yi, &y) in sources.iter().enumerate() {
                let d = (transposed.slice(xi, k)[y] - forward.slice(yi, k)[x]).abs();
                if d > worst.0 {
                    worst = (d, xi, yi, k);
                }
            }
        }
    }
    let allowed = IDENTITY_TOLERANCE * scale;
    let mut rows = vec![CheckRecord::gate("duality_transpose", "kernel of the adjoint is the transpose", allowed - worst.0, 0.0)
        .values(worst.0, allowed)
        .witness(Witness::at(
            Some(grid.point(sources[worst.1])),
            Some(grid.point(sources[worst.2])),
            Some(transposed.times()[worst.3]),
        ))];

    let metric = adjoint_consistency_metric(spec, op)?;
    let allowed = ADJOINT_REGRESSION_CONSTANT * grid.h();
    rows.push(
        CheckRecord::gate("duality_adjoint_assembly", "adjoint operator assembled directly", allowed - metric, 0.0)
            .constant("regression_constant", ADJOINT_REGRESSION_CONSTANT)
            .values(metric, allowed),
    );

    let floors = spec.require_floors()?;
    let steps = step_counts(transposed.times(), opts.dt)?;
    let stepper = Stepper::new(op, opts.dt, Orientation::Transposed);
    let states = stepper.run(&vec![1.0; op.len()], &steps)?;
    let mut worst: Option<(f64, f64, f64, f64)> = None;
    for (state, &t) in states.iter().zip(transposed.times()) {
        let bound = (-floors.h0_star.value * t).exp();
        let observed = state.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let margin = bound - observed;
        if worst.is_none_or(|w| margin / bound < w.0 / w.2) {
            worst = Some((margin, observed, bound, t));
        }
    }
    let (margin, observed, bound, t) = worst.expect("at least one time");
    rows.push(
        CheckRecord::gate("duality_adjoint_sup", "sup bound for the adjoint problem", margin, IDENTITY_TOLERANCE * bound)
            .constant("H0star", floors.h0_star.value)
            .values(observed, bound)
            .witness(Witness::at(None, None, Some(t))),
    );
    Ok(rows)
}

fn l2_row(kernel: &KernelMatrix, constants: &ConstantsBundle, rate: f64, name: &str, tag: &str) -> CheckRecord {
    let mut worst: Option<(f64, f64, f64, usize, usize)> = None;
    for s in 0..kernel.sources().len() {
        for (k, &t) in kernel.times().iter().enumerate() {
            let observed = kernel.l2_squared(s, k);
            let bound = constants.l2_bound(rate, t);
            let rel = (bound - observed) / bound;
            if worst.is_none_or(|w| rel < w.0) {
                worst = Some((rel, observed, bound, s, k));
            }
        }
    }
    let (_, observed, bound, s, k) = worst.expect("non-empty kernel");
    let src = Some(kernel.grid().point(kernel.sources()[s]));
    let t = Some(kernel.times()[k]);
    let witness = match kernel.orientation() {
        Orientation::Transposed => Witness::at(src, None, t),
        Orientation::Forward => Witness::at(None, src, t),
    };
    CheckRecord::gate(name, tag, bound - observed, L2_SLACK * bound)
        .constant("C_closed", constants.c_closed)
        .values(observed, bound)
        .witness(witness)
}

/// Squared norms in the second argument (rate `gamma1`) and in the first
/// argument (rate `gamma2`, from first-argument columns).
pub fn check_l2(transposed: &KernelMatrix, forward: &KernelMatrix, constants: &ConstantsBundle) -> Vec<CheckRecord> {
    vec![
        l2_row(transposed, constants, constants.gamma1, "l2_y", "squared norm in the second argument"),
        l2_row(forward, constants, constants.gamma2, "l2_x", "squared norm in the first argument"),
    ]
}

/// The Hölder step behind the pointwise bound, checked on the discrete kernel:
/// `p(x,y,t) <= sqrt(|p(x,.,t/2)|^2 |p(.,y,t/2)|^2) <= C_main e^(gamma t) t^(-N/2)`.
///
/// Only times whose half is on the step grid and above `t_min` are used.
pub fn check_holder_chain(
    op: &DiscreteOperator,
    kernel: &KernelMatrix,
    opts: &KernelOptions,
    constants: &ConstantsBundle,
) -> Result<Vec<CheckRecord>, CheckError> {
    if kernel.orientation() != Orientation::Transposed {
        return Err(CheckError::Precondition("the chain needs second-argument columns".into()));
    }
    let usable: Vec<(usize, f64)> = kernel
        .times()
        .iter()
        .enumerate()
        .filter(|(_, &t)| t / 2.0 >= opts.t_min * (1.0 - 1e-12) && step_count(t / 2.0, opts.dt).is_ok())
        .map(|(k, &t)| (k, t))
        .collect();
    if usable.is_empty() {
        return Ok(vec![CheckRecord::gate("holder_chain", "Hölder step", 0.0, 0.0)
            .informational()
            .note("no stored time has a usable half step")]);
    }
    let halves: Vec<f64> = usable.iter().map(|(_, t)| t / 2.0).collect();
    let sources = kernel.sources();
    let rows = kernel_matrix(op, sources, &halves, opts, Orientation::Transposed)?;
    let cols = kernel_matrix(op, sources, &halves, opts, Orientation::Forward)?;
    let grid = op.grid();

    let mut identity_err = 0.0f64;
    let mut step = (f64::INFINITY, 0.0, 0.0, 0, 0, 0.0);
    let mut chain = (f64::INFINITY, 0.0, 0.0, 0, 0, 0.0);
    let scale = kernel.max_value();
    for (h, &(k, t)) in usable.iter().enumerate() {
        let bound = constants.pointwise_bound(t);
        let product = (constants.l2_bound(constants.gamma1, t / 2.0) * constants.l2_bound(constants.gamma2, t / 2.0)).sqrt();
        identity_err = identity_err.max((product - bound).abs() / bound);
        for (xi, _) in sources.iter().enumerate() {
            for (yi, &y) in sources.iter().enumerate() {
                let observed = kernel.slice(xi, k)[y];
                let middle = (rows.l2_squared(xi, h) * cols.l2_squared(yi, h)).sqrt();
                if middle - observed < step.0 {
                    step = (middle - observed, observed, middle, xi, yi, t);
                }
                if (bound - middle) / bound < chain.0 {
                    chain = ((bound - middle) / bound, middle, bound, xi, yi, t);
                }
            }
        }
    }
    let witness = |w: (f64, f64, f64, usize, usize, f64)| {
        Witness::at(Some(grid.point(sources[w.3])), Some(grid.point(sources[w.4])), Some(w.5))
    };
    Ok(vec![
        CheckRecord::gate("holder_identity", "Hölder step constants", 1e-12 - identity_err, 0.0)
            .constant("C_main", constants.c_main)
            .note("sqrt of the product of the two squared-norm bounds at t/2 equals the pointwise bound at t"),
        CheckRecord::gate("holder_step", "Hölder step", step.0, IDENTITY_TOLERANCE * scale)
            .values(step.1, step.2)
            .witness(witness(step)),
        CheckRecord::gate("holder_chain", "Hölder step", chain.2 - chain.1, L2_SLACK * chain.2)
            .constant("C_main", constants.c_main)
            .values(chain.1, chain.2)
            .witness(witness(chain)),
    ])
}

/// `h^N sum_y eta_n(y)^2 p(y)^2` for a second-argument column.
pub fn compute_zeta(column: &[f64], grid: &BallGrid, n_cutoff: u32) -> f64 {
    let n = f64::from(n_cutoff);
    let sum: f64 = column
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let eta = cutoff_eta(n, &grid.point(i)).0;
            eta * eta * p * p
        })
        .sum();
    grid.cell_volume() * sum
}

/// Diagnostics of the cutoff-weighted norms for the approximate operator.
pub fn check_zeta(
    spec: &OperatorSpec,
    m: u32,
    grid: &Arc<BallGrid>,
    sources: &[usize],
    times: &[f64],
    opts: &KernelOptions,
    constants: &ConstantsBundle,
) -> Result<CheckRecord, CheckError> {
    let op = DiscreteOperator::assemble(&approximate(spec, m), grid.clone())?;
    let kernel = kernel_matrix(&op, sources, times, opts, Orientation::Transposed)?;
    let n_max = grid.radius().ceil().max(1.0) as u32;
    let mut monotone = true;
    let mut positive = true;
    let mut saturates = true;
    let mut worst = (f64::INFINITY, 0.0, 0.0, 0, 0);
    for s in 0..sources.len() {
        for (k, &t) in times.iter().enumerate() {
            let col = kernel.slice(s, k);
            let zetas: Vec<f64> = (1..=n_max).map(|n| compute_zeta(col, grid, n)).collect();
            positive &= zetas[0] > 0.0;
            monotone &= zetas.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-14));
            let full = kernel.l2_squared(s, k);
            saturates &= (zetas[zetas.len() - 1] - full).abs() <= 1e-12 * full;
            let bound = constants.l2_bound(constants.gamma1, t);
            let top = zetas[zetas.len() - 1];
            if (bound - top) / bound < worst.0 {
                worst = ((bound - top) / bound, top, bound, s, k);
            }
        }
    }
    Ok(CheckRecord::gate("zeta", "cutoff-weighted squared norms", worst.2 - worst.1, L2_SLACK * worst.2)
        .constant("C_closed", constants.c_closed)
        .values(worst.1, worst.2)
        .witness(Witness::at(Some(grid.point(sources[worst.3])), None, Some(times[worst.4])))
        .require(positive, "zeta_1 is not positive")
        .require(monotone, "zeta_n decreased in n")
        .require(saturates, "zeta_n for n >= radius differs from the full norm")
        .note(format!("m = {m}, n = 1..={n_max}")))
}

/// Cutoff operator: coefficient conditions on a sample, matrix identity on
/// `B(0, m)`, and domination of the ball-`m` kernel.
pub fn check_approx_kernel_domination(
    spec: &OperatorSpec,
    m: u32,
    grid: &Arc<BallGrid>,
    source_points: &[Vec<f64>],
    times: &[f64],
    dt: f64,
) -> Result<Vec<CheckRecord>, CheckError> {
    let approx = approximate(spec, m);
    let mut rows = Vec::new();

    let sample = halton_ball(CUTOFF_SAMPLE, spec.dim(), 4.0 * f64::from(m));
    let tag = "cutoff operator coefficients";
    rows.push(match validate(&approx, &sample) {
        Ok(v) => {
            let (margin, witness) = [
                (v.ellipticity_margin, &v.ellipticity_witness),
                (v.h0_margin, &v.h0_witness),
                (v.h0_star_margin, &v.h0_star_witness),
            ]
            .into_iter()
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .expect("three margins");
            CheckRecord::gate("cutoff_coefficients", tag, margin, crate::operators::FLOOR_TOLERANCE)
                .witness(Witness::at(Some(witness.clone()), None, None))
                .note(format!(
                    "ellipticity {:.3e}, H0 {:.3e}, H0star {:.3e} over {} points",
                    v.ellipticity_margin, v.h0_margin, v.h0_star_margin, v.samples
                ))
        }
        Err(e @ (OperatorError::Ellipticity { .. } | OperatorError::FloorViolation { .. })) => {
            CheckRecord::gate("cutoff_coefficients", tag, f64::NEG_INFINITY, 0.0).note(e.to_string())
        }
        Err(e) => return Err(e.into()),
    });

    let small = Arc::new(BallGrid::new(spec.dim(), grid.radius().min(f64::from(m)), grid.h()).map_err(PdeError::from)?);
    let exact = DiscreteOperator::assemble(spec, small.clone())?;
    let cut = DiscreteOperator::assemble(&approx, small.clone())?;
    let bitwise = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0f64, f64::max);
    let diff = exact
        .transport()
        .max_abs_difference(cut.transport())
        .max(bitwise(exact.potential(), cut.potential()))
        .max(bitwise(exact.drift_divergence(), cut.drift_divergence()));
    rows.push(
        CheckRecord::gate("cutoff_identity", "cutoff operator equals the operator on the inner ball", -diff, 0.0)
            .values(diff, 0.0)
            .note(format!("radius {}", small.radius())),
    );

    if grid.radius() <= f64::from(m) {
        rows.push(
            CheckRecord::gate("cutoff_domination", "kernel domination by the cutoff operator", 0.0, 0.0)
                .informational()
                .note("grid lies inside B(0, m); the kernels coincide"),
        );
        return Ok(rows);
    }
    let sources_small: Vec<usize> = source_points.iter().filter_map(|p| small.locate(p)).collect();
    let sources_big: Vec<usize> = source_points
        .iter()
        .filter(|p| small.locate(p).is_some())
        .map(|p| grid.locate(p).ok_or_else(|| PdeError::SourceOutside(p.clone())))
        .collect::<Result<_, _>>()?;
    if sources_small.is_empty() {
        return Err(CheckError::Precondition(format!("no source lies inside B(0, {m})")));
    }
    let big = DiscreteOperator::assemble(&approx, grid.clone())?;
    let opts = KernelOptions::for_operator(&exact, dt);
    let inner = kernel_matrix(&exact, &sources_small, times, &opts, Orientation::Transposed)?;
    let outer = kernel_matrix(&big, &sources_big, times, &opts, Orientation::Transposed)?;
    let map = small.embed_into(grid).ok_or(PdeError::Alignment)?;
    let scale = inner.max_value().max(outer.max_value()).max(1.0);
    let mut worst = (f64::INFINITY, 0, 0, 0);
    for s in 0..sources_small.len() {
        for k in 0..times.len() {
            let (a, b) = (inner.slice(s, k), outer.slice(s, k));
            for (i, &j) in map.iter().enumerate() {
                let d = b[j] - a[i];
                if d < worst.0 {
                    worst = (d, s, k, i);
                }
            }
        }
    }
    rows.push(
        CheckRecord::gate("cutoff_domination", "kernel domination by the cutoff operator", worst.0, IDENTITY_TOLERANCE * scale)
            .witness(Witness::at(
                Some(small.point(sources_small[worst.1])),
                Some(small.point(worst.3)),
                Some(times[worst.2]),
            )),
    );
    Ok(rows)
}

/// Green columns on nested balls: increments are nonnegative and shrink.
pub fn check_monotonicity(
    spec: &OperatorSpec,
    h: f64,
    radii: &[f64],
    source: &[f64],
    times: &[f64],
    dt: f64,
) -> Result<CheckRecord, CheckError> {
    let family = monotone_family(spec, h, radii, source, times, dt)?;
    let scale = family.columns.iter().flatten().flatten().copied().fold(0.0f64, f64::max);
    let mut worst = (f64::INFINITY, 0.0, 0);
    for pair in &family.pairs {
        for (k, &v) in pair.min_increment.iter().enumerate() {
            if v < worst.0 {
                worst = (v, pair.outer_radius, k);
            }
        }
    }
    let shrinking = (0..times.len())
        .all(|k| family.pairs.windows(2).all(|w| w[1].sup_increment[k] < w[0].sup_increment[k]));
    let sups: Vec<Vec<f64>> = family.pairs.iter().map(|p| p.sup_increment.clone()).collect();
    if family.pairs.is_empty() {
        return Ok(CheckRecord::gate("monotonicity", "monotone exhaustion by balls", 0.0, 0.0)
            .informational()
            .note("a single radius has no increments"));
    }
    Ok(CheckRecord::gate("monotonicity", "monotone exhaustion by balls", worst.0, IDENTITY_TOLERANCE * scale)
        .values(-worst.0, 0.0)
        .witness(Witness::at(Some(source.to_vec()), None, Some(times[worst.2])))
        .require(shrinking, "sup increments do not decrease with the radius")
        .note(format!("sup increments per pair and time: {sups:?}")))
}

/// Oracle settings as seen by the harness.
#[derive(Debug, Clone)]
pub struct OracleRun {
    pub mc: MCConfig,
    pub x0: Vec<f64>,
    pub time: f64,
}

/// Feynman–Kac density and mass against the discrete kernel from `x0`.
///
/// Tolerance is 3 standard errors plus a 15% systematic allowance for the
/// kernel-density bandwidth and the grid.
pub fn check_feynman_kac(
    spec: &OperatorSpec,
    op: &DiscreteOperator,
    run: &OracleRun,
) -> Result<(Vec<CheckRecord>, crate::oracles::DensityEstimate), CheckError> {
    let grid = op.grid();
    let node = grid.locate(&run.x0).ok_or_else(|| PdeError::SourceOutside(run.x0.clone()))?;
    let opts = KernelOptions::for_operator(op, run.mc.dt);
    let kernel = kernel_matrix(op, &[node], &[run.time], &opts, Orientation::Transposed)?;
    let column = kernel.slice(0, 0);
    let estimate = feynman_kac_density(spec, &run.x0, run.time, grid, &run.mc)?;
    let systematic = 0.15;
    let (p, q, se) = (column[node], estimate.values[node], estimate.std_errors[node]);
    let density = CheckRecord::gate("feynman_kac_density", "probabilistic representation", 3.0 * se + systematic * p - (q - p).abs(), 0.0)
        .values(q, p)
        .witness(Witness::at(Some(run.x0.clone()), Some(run.x0.clone()), Some(run.time)))
        .note(format!("Monte Carlo {q:.6} (SE {se:.2e}, bandwidth {:.3}) vs grid {p:.6}", estimate.bandwidth));
    let grid_mass = kernel.mass(0, 0);
    let mass = CheckRecord::gate(
        "feynman_kac_mass",
        "probabilistic representation",
        3.0 * estimate.mass_std_error + systematic * grid_mass - (estimate.total_mass - grid_mass).abs(),
        0.0,
    )
    .values(estimate.total_mass, grid_mass)
    .witness(Witness::at(Some(run.x0.clone()), None, Some(run.time)));
    Ok((vec![density, mass], estimate))
}
