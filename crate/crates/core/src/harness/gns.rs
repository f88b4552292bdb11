//! Discrete Sobolev (GNS) ratios for radial test functions.
//!
//! Inside `B(0, R)` the Dirichlet energy uses forward differences and the
//! `L^p` integral a lattice sum; the region `|x| >= R` is added as a radial
//! integral under `r = R / s`.

use rayon::prelude::*;

use super::report::CheckRecord;
use crate::constants::{gamma_half_integer, ConstantsBundle};

/// Relative slack on the sharp inequality.
pub const GNS_SLACK: f64 = 0.05;
const TAIL_POINTS: usize = 20_000;

/// A radial function `u(|x|)` with its derivative.
#[derive(Debug, Clone, Copy)]
pub enum RadialTest {
    /// `(1 + r^2)^(-(N-2)/2)`, the extremal profile.
    Talenti,
    /// `exp(-r^2 / (2 w^2))`.
    Gaussian { width: f64 },
    Zero,
}

impl RadialTest {
    pub fn name(&self) -> String {
        match self {
            RadialTest::Talenti => "talenti".into(),
            RadialTest::Gaussian { width } => format!("gaussian_w{width}"),
            RadialTest::Zero => "zero".into(),
        }
    }

    fn value(&self, r: f64, dim: usize) -> f64 {
        match *self {
            RadialTest::Talenti => (1.0 + r * r).powf(-(dim as f64 - 2.0) / 2.0),
            RadialTest::Gaussian { width } => (-r * r / (2.0 * width * width)).exp(),
            RadialTest::Zero => 0.0,
        }
    }

    fn derivative(&self, r: f64, dim: usize) -> f64 {
        match *self {
            RadialTest::Talenti => -(dim as f64 - 2.0) * r * (1.0 + r * r).powf(-(dim as f64) / 2.0),
            RadialTest::Gaussian { width } => -r / (width * width) * self.value(r, dim),
            RadialTest::Zero => 0.0,
        }
    }
}

/// Default family: the extremal profile, three Gaussians and zero.
pub fn default_tests() -> Vec<RadialTest> {
    vec![
        RadialTest::Talenti,
        RadialTest::Gaussian { width: 0.5 },
        RadialTest::Gaussian { width: 1.0 },
        RadialTest::Gaussian { width: 2.0 },
        RadialTest::Zero,
    ]
}

#[derive(Debug, Clone, Copy)]
pub struct GnsTerms {
    /// `int |Du|^2`.
    pub energy: f64,
    /// `(int |u|^p)^(2/p)` with `p = 2N/(N-2)`.
    pub norm_squared: f64,
}

impl GnsTerms {
    pub fn ratio(&self) -> f64 {
        self.energy / self.norm_squared
    }
}

fn unit_sphere_area(dim: usize) -> f64 {
    let gamma = gamma_half_integer(dim as u32).expect("dimension in range");
    2.0 * std::f64::consts::PI.powf(dim as f64 / 2.0) / gamma
}

/// Radial integral `|S^(N-1)| int_R^inf g(r) r^(N-1) dr` by the midpoint rule in `s = R/r`.
fn radial_tail(g: impl Fn(f64) -> f64, radius: f64, dim: usize) -> f64 {
    let ds = 1.0 / TAIL_POINTS as f64;
    let sum: f64 = (0..TAIL_POINTS)
        .map(|k| {
            let s = (k as f64 + 0.5) * ds;
            let r = radius / s;
            g(r) * r.powi(dim as i32 - 1) * radius / (s * s)
        })
        .sum();
    unit_sphere_area(dim) * sum * ds
}

/// Hybrid quadrature of both sides of the inequality on lattice spacing `h`.
pub fn gns_terms(test: RadialTest, dim: usize, radius: f64, h: f64) -> GnsTerms {
    let p = 2.0 * dim as f64 / (dim as f64 - 2.0);
    let extent = (radius / h).floor() as i64;
    let side = 2 * extent + 1;
    let r2_max = radius * radius;
    // Rayon over the first coordinate; each slab is summed sequentially.
    let (energy, power) = (0..side)
        .into_par_iter()
        .map(|first| {
            let mut energy = 0.0;
            let mut power = 0.0;
            let mut k = vec![-extent; dim];
            k[0] = first - extent;
            let rest = side.pow(dim as u32 - 1);
            let mut x = vec![0.0; dim];
            for idx in 0..rest {
                let mut r = idx;
                for axis in 1..dim {
                    k[axis] = r % side - extent;
                    r /= side;
                }
                for axis in 0..dim {
                    x[axis] = k[axis] as f64 * h;
                }
                let r2: f64 = x.iter().map(|v| v * v).sum();
                if r2 >= r2_max {
                    continue;
                }
                let u = test.value(r2.sqrt(), dim);
                power += u.abs().powf(p);
                for axis in 0..dim {
                    let shifted = r2 + 2.0 * x[axis] * h + h * h;
                    let d = (test.value(shifted.sqrt(), dim) - u) / h;
                    energy += d * d;
                }
            }
            (energy, power)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));
    let cell = h.powi(dim as i32);
    let energy = energy * cell + radial_tail(|r| test.derivative(r, dim).powi(2), radius, dim);
    let power = power * cell + radial_tail(|r| test.value(r, dim).abs().powf(p), radius, dim);
    GnsTerms { energy, norm_squared: power.powf(2.0 / p) }
}

/// Sharp inequality on every test function, the extremal ratio, and the
/// larger constant as a warning row.
pub fn check_gns(
    dim: usize,
    radius: f64,
    h: f64,
    tests: &[RadialTest],
    constants: &ConstantsBundle,
) -> Vec<CheckRecord> {
    let terms: Vec<(RadialTest, GnsTerms)> = tests.iter().map(|t| (*t, gns_terms(*t, dim, radius, h))).collect();
    let mut out = Vec::new();

    // Worst relative margin; the zero function (0 <= 0) only counts when it
    // is the sole test function.
    let worst = |s: f64| {
        terms
            .iter()
            .map(|(t, g)| (t, g.energy - s * g.norm_squared, s * g.norm_squared))
            .min_by(|a, b| {
                let rel = |m: f64, scale: f64| if scale > 0.0 { m / scale } else { f64::INFINITY };
                rel(a.1, a.2).total_cmp(&rel(b.1, b.2))
            })
            .expect("at least one test function")
    };

    let (t, margin, scale) = worst(constants.s_sharp);
    out.push(
        CheckRecord::gate("gns_sharp", "Sobolev inequality, sharp constant", margin, GNS_SLACK * scale)
            .constant("S_sharp", constants.s_sharp)
            .note(format!("worst test function: {}", t.name())),
    );

    if let Some((_, g)) = terms.iter().find(|(t, _)| matches!(t, RadialTest::Talenti)) {
        let ratio = g.ratio();
        let s = constants.s_sharp;
        out.push(
            CheckRecord::gate("gns_extremal_ratio", "Sobolev inequality, extremal profile", GNS_SLACK * s - (ratio - s).abs(), 0.0)
                .constant("S_sharp", s)
                .values(ratio, s)
                .note("Rayleigh ratio of the extremal profile; margin is 5% of S_sharp minus the deviation"),
        );
    }

    let (t, margin, scale) = worst(constants.s_paper);
    out.push(
        CheckRecord::gate("gns_paper_constant", "Sobolev inequality, stated constant", margin, GNS_SLACK * scale)
            .constant("S_paper", constants.s_paper)
            .note(format!("worst test function: {}; known constant discrepancy", t.name()))
            .warn_on_fail(),
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_of_gaussian_power_matches_closed_form() {
        // int_{|x|>=R} e^{-|x|^2} dx in 3D with R = 1.
        let got = radial_tail(|r| (-r * r).exp(), 1.0, 3);
        let pi = std::f64::consts::PI;
        let want = 4.0 * pi * ((-1.0f64).exp() / 2.0 + pi.sqrt() / 4.0 * ERFC_ONE);
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }

    const ERFC_ONE: f64 = 0.157_299_207_050_285_13;

    #[test]
    fn zero_function_has_zero_terms() {
        let g = gns_terms(RadialTest::Zero, 3, 2.0, 0.25);
        assert_eq!(g.energy, 0.0);
        assert_eq!(g.norm_squared, 0.0);
    }

    #[test]
    fn gaussian_energy_matches_closed_form() {
        // u = e^{-r^2/2}: int |Du|^2 = int r^2 e^{-r^2} = (3/2) pi^{3/2}.
        let g = gns_terms(RadialTest::Gaussian { width: 1.0 }, 3, 6.0, 0.1);
        let want = 1.5 * std::f64::consts::PI.powf(1.5);
        assert!((g.energy - want).abs() / want < 0.01, "{} vs {want}", g.energy);
    }
}
