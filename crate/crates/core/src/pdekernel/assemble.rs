use std::sync::Arc;

use rayon::prelude::*;

use super::grid::{BallGrid, DIRICHLET};
use super::sparse::Csr;
use super::PdeError;
use crate::operators::{OperatorSpec, PointCoefficients};

/// Scheme identifier stored with every assembled operator.
pub const SCHEME: &str = "graph-laplacian/upwind/inner-node v1";

/// `A` on a ball grid, split as `L = P - diag(H)` with `P` the diffusion and
/// drift part.
///
/// Every edge and face coefficient is taken at the endpoint nearer the origin.
/// Boundary edges therefore only see nodes of the grid, nested grids share
/// their common rows exactly, and the cutoff operator `A^(m)` assembles to the
/// same matrix as `A` whenever the grid lies in `B(0, m)`.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    grid: Arc<BallGrid>,
    transport: Csr,
    potential: Vec<f64>,
    drift_divergence: Vec<f64>,
    h0: f64,
    h0_star: f64,
    lambda: f64,
    label: String,
}

/// The endpoint of an edge used to evaluate its coefficient.
fn inner_node(grid: &BallGrid, p: usize, q: usize) -> usize {
    if q == DIRICHLET {
        return p;
    }
    let (np, nq) = (grid.squared_norm(p), grid.squared_norm(q));
    if np < nq || (np == nq && grid.lattice(p) < grid.lattice(q)) {
        p
    } else {
        q
    }
}

/// Weights of the positive stencil decomposition of `a` at one node: axis
/// edges get `a_ii - sum_j |a_ij|`, diagonals `e_i + e_j` get `a_ij^+`,
/// diagonals `e_i - e_j` get `a_ij^-`.
fn axis_weight(c: &PointCoefficients, dim: usize, i: usize) -> f64 {
    let mut w = c.diffusion[i * dim + i];
    for j in 0..dim {
        if j != i {
            w -= c.diffusion[i * dim + j].abs();
        }
    }
    w
}

impl DiscreteOperator {
    pub fn assemble(spec: &OperatorSpec, grid: Arc<BallGrid>) -> Result<DiscreteOperator, PdeError> {
        let floors = spec.require_floors()?;
        let dim = grid.dim();
        if dim != spec.dim() {
            return Err(PdeError::Dimension { grid: dim, operator: spec.dim() });
        }
        let coeffs: Vec<PointCoefficients> = (0..grid.len())
            .into_par_iter()
            .map(|i| spec.coefficients_at(&grid.point(i)))
            .collect::<Result<_, _>>()?;
        for (i, c) in coeffs.iter().enumerate() {
            let finite = c.diffusion.iter().chain(&c.drift).all(|v| v.is_finite()) && c.potential.is_finite();
            if !finite {
                return Err(PdeError::NonFinite { point: grid.point(i) });
            }
            for axis in 0..dim {
                let w = axis_weight(c, dim, axis);
                if w < 0.0 {
                    return Err(PdeError::Dominance { point: grid.point(i), axis: axis + 1, weight: w });
                }
            }
        }
        let h = grid.h();
        let h2 = h * h;
        let rows: Vec<(Vec<(usize, f64)>, f64)> = (0..grid.len())
            .into_par_iter()
            .map(|p| {
                let mut row = Vec::with_capacity(1 + 2 * dim * dim);
                let mut diag = 0.0;
                let mut divergence = 0.0;
                let mut offset = vec![0i32; dim];
                let mut edge = |offset: &[i32], weight_of: &dyn Fn(&PointCoefficients) -> f64| {
                    let q = grid.shifted(p, offset);
                    let w = weight_of(&coeffs[inner_node(&grid, p, q)]) / h2;
                    if w != 0.0 {
                        if q != DIRICHLET {
                            row.push((q, w));
                        }
                        diag -= w;
                    }
                };
                for i in 0..dim {
                    for s in [1, -1] {
                        offset[i] = s;
                        edge(&offset, &|c| axis_weight(c, dim, i));
                        offset[i] = 0;
                    }
                    for j in (i + 1)..dim {
                        for (si, sj) in [(1, 1), (-1, -1), (1, -1), (-1, 1)] {
                            offset[i] = si;
                            offset[j] = sj;
                            let same = si == sj;
                            edge(&offset, &|c| {
                                let a = c.diffusion[i * dim + j];
                                if same {
                                    a.max(0.0)
                                } else {
                                    (-a).max(0.0)
                                }
                            });
                            offset[i] = 0;
                            offset[j] = 0;
                        }
                    }
                }
                // upwind drift, face velocities at the inner node of each face
                for i in 0..dim {
                    let up = grid.neighbor(p, i, true);
                    let down = grid.neighbor(p, i, false);
                    let f_up = coeffs[inner_node(&grid, p, up)].drift[i];
                    let f_down = coeffs[inner_node(&grid, p, down)].drift[i];
                    let out_up = f_up.max(0.0) / h;
                    let out_down = (-f_down).max(0.0) / h;
                    if up != DIRICHLET && out_up != 0.0 {
                        row.push((up, out_up));
                    }
                    if down != DIRICHLET && out_down != 0.0 {
                        row.push((down, out_down));
                    }
                    diag -= out_up + out_down;
                    divergence += (f_up - f_down) / h;
                }
                row.push((p, diag));
                (row, divergence)
            })
            .collect();
        let mut csr_rows = Vec::with_capacity(rows.len());
        let mut drift_divergence = Vec::with_capacity(rows.len());
        for (row, div) in rows {
            csr_rows.push(row);
            drift_divergence.push(div);
        }
        Ok(DiscreteOperator {
            transport: Csr::from_rows(csr_rows),
            potential: coeffs.iter().map(|c| c.potential).collect(),
            drift_divergence,
            h0: floors.h0.value,
            h0_star: floors.h0_star.value,
            lambda: spec.lambda(),
            label: spec.label().to_string(),
            grid,
        })
    }

    pub fn grid(&self) -> &Arc<BallGrid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn h0(&self) -> f64 {
        self.h0
    }

    pub fn h0_star(&self) -> f64 {
        self.h0_star
    }

    /// Diffusion plus drift, without the potential.
    pub fn transport(&self) -> &Csr {
        &self.transport
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// Discrete divergence of the face velocities, one value per node.
    pub fn drift_divergence(&self) -> &[f64] {
        &self.drift_divergence
    }

    /// `L = P - diag(H)`.
    pub fn generator(&self) -> Csr {
        let minus_h: Vec<f64> = self.potential.iter().map(|v| -v).collect();
        self.transport.add_diagonal(&minus_h)
    }

    /// Diagonal shift of the implicit step:
    /// `max(dt H, e^(H0 dt) - 1, e^(H0* dt) - 1 - dt div_h F)`.
    ///
    /// The last two terms are `O(dt^2)` perturbations (given the floors) that
    /// make the row and column sums of the step matrix at least `e^(H0 dt)`
    /// and `e^(H0* dt)`, so the discrete mass and adjoint bounds hold with the
    /// continuous exponentials.
    pub fn potential_shift(&self, dt: f64) -> Vec<f64> {
        let row_floor = (self.h0 * dt).exp_m1();
        let col_floor = (self.h0_star * dt).exp_m1();
        self.potential
            .iter()
            .zip(&self.drift_divergence)
            .map(|(&h, &div)| (dt * h).max(row_floor).max(col_floor - dt * div))
            .collect()
    }

    /// `B = I - dt P + diag(shift)`; one step is `B u_{k+1} = u_k`.
    pub fn step_matrix(&self, dt: f64) -> Csr {
        let shift = self.potential_shift(dt);
        let diag: Vec<f64> = shift.iter().map(|s| 1.0 + s).collect();
        self.transport.scaled(-dt).add_diagonal(&diag)
    }
}
