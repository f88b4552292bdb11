//! Feynman-Kac Monte Carlo estimate of `p(x0, ., t)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::OracleError;
use crate::operators::OperatorSpec;
use crate::pdekernel::{step_count, BallGrid};

/// Paths per independently seeded batch.
pub const BATCH_SIZE: usize = 1024;
/// Kernel contributions beyond this many bandwidths are dropped.
pub const KDE_CUTOFF: f64 = 5.0;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MCConfig {
    pub samples: usize,
    pub dt: f64,
    pub seed: u64,
    /// `None` selects Scott's rule.
    pub bandwidth: Option<f64>,
    /// Paths leaving `B(0, r_trunc)` are killed.
    pub r_trunc: f64,
}

impl MCConfig {
    pub fn new(samples: usize, dt: f64, seed: u64) -> MCConfig {
        MCConfig { samples, dt, seed, bandwidth: None, r_trunc: f64::INFINITY }
    }

    fn validate(&self) -> Result<(), OracleError> {
        if self.samples < 1000 {
            return Err(OracleError::Config(format!("sample count {} is below 1000", self.samples)));
        }
        if !(self.dt > 0.0) {
            return Err(OracleError::Config(format!("time step {} must be positive", self.dt)));
        }
        if let Some(b) = self.bandwidth {
            if !(b > 0.0) {
                return Err(OracleError::Config(format!("bandwidth {b} must be positive")));
            }
        }
        if !(self.r_trunc > 0.0) {
            return Err(OracleError::Config(format!("truncation radius {} must be positive", self.r_trunc)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityEstimate {
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub bandwidth: f64,
    /// Mean weight of surviving paths.
    pub total_mass: f64,
    pub mass_std_error: f64,
    pub samples: usize,
    pub killed: usize,
}

struct Endpoint {
    x: Vec<f64>,
    weight: f64,
}

/// Lower Cholesky factor of a symmetric positive definite row-major matrix.
fn cholesky(m: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

struct Dynamics<'a> {
    spec: &'a OperatorSpec,
    /// Cholesky factor of `2a` when the diffusion is constant.
    frozen: Option<Vec<f64>>,
}

impl Dynamics<'_> {
    fn new(spec: &OperatorSpec) -> Result<Dynamics<'_>, OracleError> {
        let n = spec.dim();
        let constant = (0..n).all(|i| (i..n).all(|j| spec.diffusion().get(i, j).is_constant()));
        let frozen = if constant {
            let origin = vec![0.0; n];
            Some(Self::factor(spec, &origin)?)
        } else {
            None
        };
        Ok(Dynamics { spec, frozen })
    }

    fn factor(spec: &OperatorSpec, x: &[f64]) -> Result<Vec<f64>, OracleError> {
        let a = spec.diffusion().eval(x).map_err(|source| OracleError::Eval { point: x.to_vec(), source })?;
        let two_a: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
        cholesky(&two_a, spec.dim()).ok_or_else(|| OracleError::Cholesky { point: x.to_vec() })
    }

    /// Drift `F_i + sum_j D_j a_ij`, noise factor and potential at `x`.
    fn at(&self, x: &[f64]) -> Result<(Vec<f64>, std::borrow::Cow<'_, [f64]>, f64), OracleError> {
        let n = self.spec.dim();
        let c = self.spec.coefficients_at(x).map_err(|e| OracleError::Operator(Box::new(e)))?;
        let mut drift = c.drift;
        let sigma = match &self.frozen {
            Some(l) => std::borrow::Cow::Borrowed(&l[..]),
            None => {
                for (i, b) in drift.iter_mut().enumerate() {
                    for j in 0..n {
                        *b += self
                            .spec
                            .diffusion()
                            .get(i, j)
                            .partial(x, j)
                            .map_err(|source| OracleError::Eval { point: x.to_vec(), source })?;
                    }
                }
                std::borrow::Cow::Owned(Self::factor(self.spec, x)?)
            }
        };
        Ok((drift, sigma, c.potential))
    }
}

fn simulate_batch(
    dynamics: &Dynamics<'_>,
    x0: &[f64],
    steps: usize,
    mc: &MCConfig,
    batch: usize,
    count: usize,
) -> Result<Vec<Option<Endpoint>>, OracleError> {
    let n = x0.len();
    let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
    rng.set_stream(batch as u64);
    let sqrt_dt = mc.dt.sqrt();
    let r2_trunc = mc.r_trunc * mc.r_trunc;
    let mut out = Vec::with_capacity(count);
    let mut z = vec![0.0; n];
    for _ in 0..count {
        let mut x = x0.to_vec();
        let mut log_weight = 0.0;
        let mut alive = true;
        for _ in 0..steps {
            let (drift, sigma, h) = dynamics.at(&x)?;
            log_weight -= h * mc.dt;
            for v in z.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            for i in 0..n {
                let mut noise = 0.0;
                for k in 0..=i {
                    noise += sigma[i * n + k] * z[k];
                }
                x[i] += drift[i] * mc.dt + noise * sqrt_dt;
            }
            if x.iter().any(|v| !v.is_finite()) || !log_weight.is_finite() {
                return Err(OracleError::NonFinitePath { batch, point: x });
            }
            if x.iter().map(|v| v * v).sum::<f64>() >= r2_trunc {
                alive = false;
                break;
            }
        }
        out.push(alive.then(|| Endpoint { x, weight: log_weight.exp() }));
    }
    Ok(out)
}

/// Scott's rule `sigma n^(-1/(N+4))` with `sigma` the mean per-axis spread.
fn scott_bandwidth(points: &[&Endpoint], dim: usize) -> f64 {
    let m = points.len() as f64;
    let mut spread = 0.0;
    for axis in 0..dim {
        let mean = points.iter().map(|p| p.x[axis]).sum::<f64>() / m;
        let var = points.iter().map(|p| (p.x[axis] - mean).powi(2)).sum::<f64>() / (m - 1.0);
        spread += var.sqrt();
    }
    (spread / dim as f64) * m.powf(-1.0 / (dim as f64 + 4.0))
}

/// Weighted endpoint density of paths from `x0`, evaluated at the grid nodes.
pub fn feynman_kac_density(
    spec: &OperatorSpec,
    x0: &[f64],
    t: f64,
    grid: &BallGrid,
    mc: &MCConfig,
) -> Result<DensityEstimate, OracleError> {
    mc.validate()?;
    let dim = spec.dim();
    if x0.len() != dim || grid.dim() != dim {
        return Err(OracleError::Dimension { expected: dim, got: x0.len() });
    }
    let steps = step_count(t, mc.dt).map_err(|_| OracleError::Config(format!("t = {t} is not a multiple of dt = {}", mc.dt)))?;
    let dynamics = Dynamics::new(spec)?;
    let batches = mc.samples.div_ceil(BATCH_SIZE);
    let endpoints: Vec<Vec<Option<Endpoint>>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let count = BATCH_SIZE.min(mc.samples - b * BATCH_SIZE);
            simulate_batch(&dynamics, x0, steps, mc, b, count)
        })
        .collect::<Result<_, _>>()?;
    let survivors: Vec<&Endpoint> = endpoints.iter().flatten().flatten().collect();
    let samples = mc.samples as f64;
    let killed = mc.samples - survivors.len();
    let bandwidth = match mc.bandwidth {
        Some(b) => b,
        None if survivors.len() > 1 => scott_bandwidth(&survivors, dim),
        None => return Err(OracleError::Config("every path was killed".into())),
    };

    let mut sum_w = 0.0;
    let mut sum_w2 = 0.0;
    for p in &survivors {
        sum_w += p.weight;
        sum_w2 += p.weight * p.weight;
    }
    let total_mass = sum_w / samples;
    let mass_std_error = ((sum_w2 / samples - total_mass * total_mass).max(0.0) / samples).sqrt();

    let n_nodes = grid.len();
    let mut s1 = vec![0.0; n_nodes];
    let mut s2 = vec![0.0; n_nodes];
    let norm = (2.0 * std::f64::consts::PI * bandwidth * bandwidth).powf(-(dim as f64) / 2.0);
    let reach = KDE_CUTOFF * bandwidth;
    let span = (reach / grid.h()).ceil() as i32;
    let side = 2 * span + 1;
    let window = (side as usize).pow(dim as u32);
    let mut lattice = vec![0i32; dim];
    for p in &survivors {
        let center: Vec<i32> = p.x.iter().map(|v| (v / grid.h()).round() as i32).collect();
        for cell in 0..window {
            let mut rest = cell;
            for axis in (0..dim).rev() {
                lattice[axis] = center[axis] + (rest % side as usize) as i32 - span;
                rest /= side as usize;
            }
            let Some(node) = grid.index_of(&lattice) else { continue };
            let r2: f64 = lattice
                .iter()
                .zip(&p.x)
                .map(|(&c, &x)| (f64::from(c) * grid.h() - x).powi(2))
                .sum();
            if r2 <= reach * reach {
                let z = p.weight * norm * (-r2 / (2.0 * bandwidth * bandwidth)).exp();
                s1[node] += z;
                s2[node] += z * z;
            }
        }
    }
    let values: Vec<f64> = s1.iter().map(|s| s / samples).collect();
    let std_errors: Vec<f64> = s2
        .iter()
        .zip(&values)
        .map(|(s, m)| ((s / samples - m * m).max(0.0) / samples).sqrt())
        .collect();
    Ok(DensityEstimate { values, std_errors, bandwidth, total_mass, mass_std_error, samples: mc.samples, killed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::laplacian;

    #[test]
    fn cholesky_of_a_known_matrix() {
        let l = cholesky(&[4.0, 2.0, 2.0, 3.0], 2).unwrap();
        assert_eq!(l, vec![2.0, 0.0, 1.0, 2f64.sqrt()]);
        assert!(cholesky(&[1.0, 2.0, 2.0, 1.0], 2).is_none());
    }

    #[test]
    fn too_few_samples_rejected() {
        let grid = BallGrid::new(3, 1.0, 0.25).unwrap();
        let mc = MCConfig::new(10, 0.01, 1);
        assert!(matches!(
            feynman_kac_density(&laplacian(3), &[0.0; 3], 0.1, &grid, &mc),
            Err(OracleError::Config(_))
        ));
    }

    #[test]
    fn reproducible_for_a_seed() {
        let grid = BallGrid::new(3, 2.0, 0.25).unwrap();
        let mut mc = MCConfig::new(3000, 0.05, 42);
        mc.bandwidth = Some(0.3);
        let a = feynman_kac_density(&laplacian(3), &[0.0; 3], 0.25, &grid, &mc).unwrap();
        let b = feynman_kac_density(&laplacian(3), &[0.0; 3], 0.25, &grid, &mc).unwrap();
        assert_eq!(a.values, b.values);
        mc.seed = 43;
        let c = feynman_kac_density(&laplacian(3), &[0.0; 3], 0.25, &grid, &mc).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn kde_mass_matches_weights_for_interior_mass() {
        let grid = BallGrid::new(3, 4.0, 0.25).unwrap();
        let mut mc = MCConfig::new(4000, 0.05, 7);
        mc.bandwidth = Some(0.3);
        let est = feynman_kac_density(&laplacian(3), &[0.0; 3], 0.25, &grid, &mc).unwrap();
        let kde_mass: f64 = est.values.iter().sum::<f64>() * grid.cell_volume();
        assert!((kde_mass - est.total_mass).abs() < 0.02);
        assert_eq!(est.total_mass, 1.0);
    }
}
