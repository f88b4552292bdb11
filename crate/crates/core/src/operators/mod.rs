//! Operator model `A = sum_ij D_j(a_ij D_i) + F.D - H` on `R^N`.
//!
//! Coefficients may be unbounded. The lower floors `H0 <= inf H` and
//! `H0* <= inf (div F + H)` are either declared or estimated by sampling;
//! both are kept non-positive (a positive infimum is clamped to zero).

pub mod cutoff;
pub mod jacobi;
pub mod sampling;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::coeffparse::{CoefficientField, EvalError, Expr, ParseError};

pub use cutoff::cutoff_eta;
pub use sampling::halton_ball;

/// Ellipticity margins below this count as violations.
pub const ELLIPTICITY_TOLERANCE: f64 = 1e-12;
/// Floor margins below this count as violations.
pub const FLOOR_TOLERANCE: f64 = 1e-9;
/// Default number of validation points.
pub const DEFAULT_SAMPLE_COUNT: usize = 10_000;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("dimension {0} is not supported (need 3 <= N <= 8)")]
    Dimension(usize),
    #[error("ellipticity constant must be positive and finite, got {0}")]
    Lambda(f64),
    #[error("diffusion matrix is not symmetric: a{i}{j} and a{j}{i} differ")]
    Symmetry { i: usize, j: usize },
    #[error("expected {expected} entries for {what}, got {got}")]
    Shape { what: &'static str, expected: usize, got: usize },
    #[error("field for {what} lives in dimension {got}, operator in {expected}")]
    FieldDimension { what: String, expected: usize, got: usize },
    #[error("could not parse {what}: {source}")]
    Parse {
        what: String,
        #[source]
        source: ParseError,
    },
    #[error("ellipticity violated at {point:?}: smallest eigenvalue {min_eigenvalue} < lambda = {lambda}")]
    Ellipticity { point: Vec<f64>, min_eigenvalue: f64, lambda: f64 },
    #[error("floor {floor} = {bound} violated at {point:?}: value {value}")]
    FloorViolation { floor: &'static str, bound: f64, value: f64, point: Vec<f64> },
    #[error("{what} is not finite at {point:?}")]
    NonFinite { what: String, point: Vec<f64> },
    #[error("evaluating {what} at {point:?}: {source}")]
    Eval {
        what: String,
        point: Vec<f64>,
        #[source]
        source: EvalError,
    },
    #[error("operator floors are neither declared nor estimated")]
    MissingFloors,
    #[error("empty sample")]
    EmptySample,
}

/// Symmetric `N x N` matrix of fields; only the upper triangle is stored.
#[derive(Debug, Clone)]
pub struct SymmetricMatrix {
    dim: usize,
    upper: Vec<CoefficientField>,
}

fn upper_index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * dim - i * (i + 1) / 2 + j
}

impl SymmetricMatrix {
    pub fn identity(dim: usize) -> SymmetricMatrix {
        SymmetricMatrix::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> SymmetricMatrix {
        let mut upper = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in i..dim {
                upper.push(CoefficientField::constant(if i == j { scale } else { 0.0 }, dim));
            }
        }
        SymmetricMatrix { dim, upper }
    }

    /// Row-major upper triangle `a11, a12, .., a1N, a22, ..`.
    pub fn from_upper(dim: usize, upper: Vec<CoefficientField>) -> Result<SymmetricMatrix, OperatorError> {
        let expected = dim * (dim + 1) / 2;
        if upper.len() != expected {
            return Err(OperatorError::Shape { what: "diffusion upper triangle", expected, got: upper.len() });
        }
        Ok(SymmetricMatrix { dim, upper })
    }

    /// Full matrix; rejected unless `a_ij` and `a_ji` are the same expression.
    pub fn from_full(rows: Vec<Vec<CoefficientField>>) -> Result<SymmetricMatrix, OperatorError> {
        let dim = rows.len();
        let mut upper = Vec::with_capacity(dim * (dim + 1) / 2);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(OperatorError::Shape { what: "diffusion row", expected: dim, got: row.len() });
            }
            for j in i..dim {
                if i != j && row[j].expr() != rows[j][i].expr() {
                    return Err(OperatorError::Symmetry { i: i + 1, j: j + 1 });
                }
                upper.push(row[j].clone());
            }
        }
        Ok(SymmetricMatrix { dim, upper })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &CoefficientField {
        &self.upper[upper_index(self.dim, i, j)]
    }

    /// Matrix values at `x`, row-major.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.get(i, j).eval(x)?;
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        Ok(out)
    }

    fn map(&self, f: impl Fn(usize, usize, &CoefficientField) -> CoefficientField) -> SymmetricMatrix {
        let mut upper = Vec::with_capacity(self.upper.len());
        for i in 0..self.dim {
            for j in i..self.dim {
                upper.push(f(i, j, self.get(i, j)));
            }
        }
        SymmetricMatrix { dim: self.dim, upper }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FloorSource {
    Declared,
    Estimated,
}

/// A potential floor after clamping to `<= 0`. `raw` keeps the unclamped value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Floor {
    pub value: f64,
    pub raw: f64,
    pub source: FloorSource,
}

impl Floor {
    pub fn new(raw: f64, source: FloorSource, name: &str) -> Floor {
        if raw > 0.0 {
            log::warn!("floor {name} = {raw} is positive; clamped to 0");
        }
        Floor { value: raw.min(0.0), raw, source }
    }

    pub fn is_clamped(&self) -> bool {
        self.raw > self.value
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Floors {
    /// Lower bound of `H`.
    pub h0: Floor,
    /// Lower bound of `div F + H`.
    pub h0_star: Floor,
}

impl Floors {
    pub fn declared(h0: f64, h0_star: f64) -> Floors {
        Floors {
            h0: Floor::new(h0, FloorSource::Declared, "H0"),
            h0_star: Floor::new(h0_star, FloorSource::Declared, "H0star"),
        }
    }

    pub fn certified(&self) -> bool {
        self.h0.source == FloorSource::Declared && self.h0_star.source == FloorSource::Declared
    }
}

/// Coefficients evaluated at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCoefficients {
    /// Row-major `N x N`.
    pub diffusion: Vec<f64>,
    pub drift: Vec<f64>,
    pub potential: f64,
}

#[derive(Debug, Clone)]
pub struct OperatorSpec {
    dim: usize,
    lambda: f64,
    diffusion: SymmetricMatrix,
    drift: Vec<CoefficientField>,
    potential: CoefficientField,
    floors: Option<Floors>,
    label: String,
}

impl OperatorSpec {
    pub fn new(
        lambda: f64,
        diffusion: SymmetricMatrix,
        drift: Vec<CoefficientField>,
        potential: CoefficientField,
    ) -> Result<OperatorSpec, OperatorError> {
        let dim = diffusion.dim();
        if !(3..=8).contains(&dim) {
            return Err(OperatorError::Dimension(dim));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(OperatorError::Lambda(lambda));
        }
        if drift.len() != dim {
            return Err(OperatorError::Shape { what: "drift", expected: dim, got: drift.len() });
        }
        let mut all: Vec<(String, &CoefficientField)> = vec![("H".into(), &potential)];
        for (i, f) in drift.iter().enumerate() {
            all.push((format!("F{}", i + 1), f));
        }
        for i in 0..dim {
            for j in i..dim {
                all.push((format!("a{}{}", i + 1, j + 1), diffusion.get(i, j)));
            }
        }
        for (what, f) in all {
            if f.dim() != dim {
                return Err(OperatorError::FieldDimension { what, expected: dim, got: f.dim() });
            }
        }
        Ok(OperatorSpec { dim, lambda, diffusion, drift, potential, floors: None, label: String::new() })
    }

    /// Builds a spec from expression strings. `diffusion` is the full matrix.
    pub fn from_strings(
        dim: usize,
        lambda: f64,
        diffusion: &[Vec<&str>],
        drift: &[&str],
        potential: &str,
    ) -> Result<OperatorSpec, OperatorError> {
        let parse = |what: String, s: &str| {
            CoefficientField::parse(s, dim).map_err(|source| OperatorError::Parse { what, source })
        };
        let mut rows = Vec::with_capacity(diffusion.len());
        for (i, row) in diffusion.iter().enumerate() {
            let mut parsed = Vec::with_capacity(row.len());
            for (j, s) in row.iter().enumerate() {
                parsed.push(parse(format!("a{}{}", i + 1, j + 1), s)?);
            }
            rows.push(parsed);
        }
        let drift = drift
            .iter()
            .enumerate()
            .map(|(i, s)| parse(format!("F{}", i + 1), s))
            .collect::<Result<Vec<_>, _>>()?;
        let potential = parse("H".into(), potential)?;
        OperatorSpec::new(lambda, SymmetricMatrix::from_full(rows)?, drift, potential)
    }

    pub fn with_floors(mut self, floors: Floors) -> OperatorSpec {
        self.floors = Some(floors);
        self
    }

    pub fn with_declared_floors(self, h0: f64, h0_star: f64) -> OperatorSpec {
        self.with_floors(Floors::declared(h0, h0_star))
    }

    /// Estimates the floors on `sample` and attaches them (marked non-certified).
    pub fn with_estimated_floors(self, sample: &[Vec<f64>]) -> Result<OperatorSpec, OperatorError> {
        let est = estimate_floors(&self, sample)?;
        Ok(self.with_floors(est.floors()))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> OperatorSpec {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn diffusion(&self) -> &SymmetricMatrix {
        &self.diffusion
    }

    pub fn drift(&self) -> &[CoefficientField] {
        &self.drift
    }

    pub fn potential(&self) -> &CoefficientField {
        &self.potential
    }

    pub fn floors(&self) -> Option<Floors> {
        self.floors
    }

    pub fn require_floors(&self) -> Result<Floors, OperatorError> {
        self.floors.ok_or(OperatorError::MissingFloors)
    }

    pub fn coefficients_at(&self, x: &[f64]) -> Result<PointCoefficients, OperatorError> {
        let wrap = |what: &str| {
            let point = x.to_vec();
            let what = what.to_string();
            move |source| OperatorError::Eval { what, point, source }
        };
        let diffusion = self.diffusion.eval(x).map_err(wrap("diffusion"))?;
        let drift = self
            .drift
            .iter()
            .map(|f| f.eval(x))
            .collect::<Result<Vec<_>, _>>()
            .map_err(wrap("drift"))?;
        let potential = self.potential.eval(x).map_err(wrap("potential"))?;
        Ok(PointCoefficients { diffusion, drift, potential })
    }

    /// `div F (x)` by forward-mode differentiation.
    pub fn drift_divergence(&self, x: &[f64]) -> Result<f64, OperatorError> {
        crate::coeffparse::divergence(&self.drift, x).map_err(|source| OperatorError::Eval {
            what: "div F".into(),
            point: x.to_vec(),
            source,
        })
    }

    /// `div F + H` at `x`.
    pub fn adjoint_potential(&self, x: &[f64]) -> Result<f64, OperatorError> {
        let h = self.potential.eval(x).map_err(|source| OperatorError::Eval {
            what: "potential".into(),
            point: x.to_vec(),
            source,
        })?;
        Ok(self.drift_divergence(x)? + h)
    }
}

/// `A = sum D_ii`.
pub fn laplacian(dim: usize) -> OperatorSpec {
    OperatorSpec::new(
        1.0,
        SymmetricMatrix::identity(dim),
        (0..dim).map(|_| CoefficientField::constant(0.0, dim)).collect(),
        CoefficientField::constant(0.0, dim),
    )
    .expect("laplacian is well formed")
    .with_declared_floors(0.0, 0.0)
    .with_label("laplacian")
}

/// Identity diffusion with drift `F = -x`: `div F + H = -N`.
pub fn ornstein_uhlenbeck(dim: usize) -> OperatorSpec {
    OperatorSpec::new(
        1.0,
        SymmetricMatrix::identity(dim),
        (0..dim).map(|i| CoefficientField::coordinate(i, dim).negate()).collect(),
        CoefficientField::constant(0.0, dim),
    )
    .expect("ornstein-uhlenbeck is well formed")
    .with_declared_floors(0.0, -(dim as f64))
    .with_label("ornstein_uhlenbeck")
}

/// Polynomial form of `|x|^2`, differentiable at the origin.
pub fn squared_norm_text(dim: usize) -> String {
    (1..=dim).map(|i| format!("x{i}^2")).collect::<Vec<_>>().join(" + ")
}

/// Identity diffusion, `F = -x |x|^2`, `H = (N + 2)|x|^2`; `div F + H = 0`.
pub fn cubic_drift(dim: usize) -> OperatorSpec {
    let r2 = squared_norm_text(dim);
    let drift: Vec<String> = (1..=dim).map(|i| format!("-x{i}*({r2})")).collect();
    let potential = format!("(N+2)*({r2})");
    let id: Vec<Vec<&str>> =
        (0..dim).map(|i| (0..dim).map(|j| if i == j { "1" } else { "0" }).collect()).collect();
    let drift_refs: Vec<&str> = drift.iter().map(String::as_str).collect();
    OperatorSpec::from_strings(dim, 1.0, &id, &drift_refs, &potential)
        .expect("cubic drift is well formed")
        .with_declared_floors(0.0, 0.0)
        .with_label("cubic_drift")
}

/// `a(x)(xi, nu) = sum a_ij(x) xi_i nu_j`.
pub fn quadratic_form(spec: &OperatorSpec, x: &[f64], xi: &[f64], nu: &[f64]) -> Result<f64, OperatorError> {
    let n = spec.dim();
    if xi.len() != n || nu.len() != n {
        return Err(OperatorError::Shape { what: "quadratic form vectors", expected: n, got: xi.len().min(nu.len()) });
    }
    let a = spec.diffusion.eval(x).map_err(|source| OperatorError::Eval {
        what: "diffusion".into(),
        point: x.to_vec(),
        source,
    })?;
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += a[i * n + j] * xi[i] * nu[j];
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub samples: usize,
    /// min over the sample of (smallest eigenvalue of a(x)) - lambda.
    pub ellipticity_margin: f64,
    pub ellipticity_witness: Vec<f64>,
    /// min of H(x) - H0.
    pub h0_margin: f64,
    pub h0_witness: Vec<f64>,
    /// min of div F(x) + H(x) - H0*.
    pub h0_star_margin: f64,
    pub h0_star_witness: Vec<f64>,
    pub symmetric: bool,
    pub floors: Floors,
    pub floors_certified: bool,
}

struct PointCheck {
    eig_margin: f64,
    h: f64,
    adjoint: f64,
}

fn check_point(spec: &OperatorSpec, x: &[f64]) -> Result<PointCheck, OperatorError> {
    let c = spec.coefficients_at(x)?;
    let finite = |what: &str, v: f64| {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(OperatorError::NonFinite { what: what.into(), point: x.to_vec() })
        }
    };
    for &v in &c.diffusion {
        finite("diffusion", v)?;
    }
    for &v in &c.drift {
        finite("drift", v)?;
    }
    let h = finite("potential", c.potential)?;
    let div = finite("div F", spec.drift_divergence(x)?)?;
    let min_eig = jacobi::symmetric_eigenvalues(&c.diffusion, spec.dim())[0];
    Ok(PointCheck { eig_margin: min_eig - spec.lambda(), h, adjoint: div + h })
}

fn evaluate_sample(spec: &OperatorSpec, sample: &[Vec<f64>]) -> Result<Vec<PointCheck>, OperatorError> {
    if sample.is_empty() {
        return Err(OperatorError::EmptySample);
    }
    sample.par_iter().map(|x| check_point(spec, x)).collect()
}

fn argmin(values: impl Iterator<Item = f64>) -> (usize, f64) {
    values
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, v)| if v < bv { (i, v) } else { (bi, bv) })
}

/// Checks ellipticity and (declared) floors on `sample`.
pub fn validate(spec: &OperatorSpec, sample: &[Vec<f64>]) -> Result<ValidationReport, OperatorError> {
    let floors = spec.require_floors()?;
    let checks = evaluate_sample(spec, sample)?;
    let (ie, eig) = argmin(checks.iter().map(|c| c.eig_margin));
    if eig < -ELLIPTICITY_TOLERANCE {
        return Err(OperatorError::Ellipticity {
            point: sample[ie].clone(),
            min_eigenvalue: eig + spec.lambda(),
            lambda: spec.lambda(),
        });
    }
    let (ih, hmin) = argmin(checks.iter().map(|c| c.h - floors.h0.value));
    let (ia, amin) = argmin(checks.iter().map(|c| c.adjoint - floors.h0_star.value));
    if floors.h0.source == FloorSource::Declared && hmin < -FLOOR_TOLERANCE {
        return Err(OperatorError::FloorViolation {
            floor: "H0",
            bound: floors.h0.value,
            value: checks[ih].h,
            point: sample[ih].clone(),
        });
    }
    if floors.h0_star.source == FloorSource::Declared && amin < -FLOOR_TOLERANCE {
        return Err(OperatorError::FloorViolation {
            floor: "H0star",
            bound: floors.h0_star.value,
            value: checks[ia].adjoint,
            point: sample[ia].clone(),
        });
    }
    Ok(ValidationReport {
        samples: sample.len(),
        ellipticity_margin: eig,
        ellipticity_witness: sample[ie].clone(),
        h0_margin: hmin,
        h0_witness: sample[ih].clone(),
        h0_star_margin: amin,
        h0_star_witness: sample[ia].clone(),
        symmetric: true,
        floors,
        floors_certified: floors.certified(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FloorEstimate {
    /// Sampled infimum of H before clamping.
    pub h_infimum: f64,
    pub h_point: Vec<f64>,
    /// Sampled infimum of div F + H before clamping.
    pub adjoint_infimum: f64,
    pub adjoint_point: Vec<f64>,
}

impl FloorEstimate {
    pub fn floors(&self) -> Floors {
        Floors {
            h0: Floor::new(self.h_infimum, FloorSource::Estimated, "H0"),
            h0_star: Floor::new(self.adjoint_infimum, FloorSource::Estimated, "H0star"),
        }
    }
}

/// Sampled infima of `H` and `div F + H`. Not a proof; callers should confirm.
pub fn estimate_floors(spec: &OperatorSpec, sample: &[Vec<f64>]) -> Result<FloorEstimate, OperatorError> {
    let checks = evaluate_sample(spec, sample)?;
    let (ih, h) = argmin(checks.iter().map(|c| c.h));
    let (ia, a) = argmin(checks.iter().map(|c| c.adjoint));
    Ok(FloorEstimate {
        h_infimum: h,
        h_point: sample[ih].clone(),
        adjoint_infimum: a,
        adjoint_point: sample[ia].clone(),
    })
}

/// Formal adjoint `A* = A0 - F.D - (div F + H)`.
///
/// Floors swap: the adjoint's potential floor is `H0*`, and its
/// `div + potential` floor is `H0` since `div(-F) + div F + H = H`.
pub fn adjoint(spec: &OperatorSpec) -> Result<OperatorSpec, OperatorError> {
    for x in halton_ball(256, spec.dim(), 2.0) {
        spec.drift_divergence(&x)?;
    }
    let drift: Vec<CoefficientField> = spec.drift.iter().map(CoefficientField::negate).collect();
    let potential = CoefficientField::divergence_of(&spec.drift).add(&spec.potential);
    let mut out = OperatorSpec::new(spec.lambda, spec.diffusion.clone(), drift, potential)?;
    out.floors = spec.floors.map(|f| Floors { h0: f.h0_star, h0_star: f.h0 });
    out.label = format!("adjoint({})", spec.label);
    Ok(out)
}

/// Cutoff approximation `A^(m)`: coefficients unchanged on `B(0, m)`,
/// diffusion `lambda I`, zero drift and potential outside `B(0, 3m)`.
///
/// `a^(m) = eta_m a + lambda (1 - eta_m) I`, `F^(m) = eta_m F`,
/// `H^(m) = eta_m H - F.D eta_m + |F| |D eta_m|`. Floors are inherited.
pub fn approximate(spec: &OperatorSpec, m: u32) -> OperatorSpec {
    assert!(m >= 1, "cutoff index must be at least 1");
    let dim = spec.dim;
    let scale = f64::from(m);
    let eta = CoefficientField::from_expr(Expr::Cutoff { scale }, dim);
    let one_minus_eta = CoefficientField::constant(1.0, dim).sub(&eta);
    let lambda = CoefficientField::constant(spec.lambda, dim);
    let diffusion = spec.diffusion.map(|i, j, a| {
        let inner = eta.mul(a);
        if i == j {
            inner.add(&lambda.mul(&one_minus_eta))
        } else {
            inner
        }
    });
    let drift: Vec<CoefficientField> = spec.drift.iter().map(|f| eta.mul(f)).collect();
    let mut transport: Option<CoefficientField> = None;
    let mut squared: Option<CoefficientField> = None;
    for (axis, f) in spec.drift.iter().enumerate() {
        let d_eta = CoefficientField::from_expr(Expr::CutoffGrad { scale, axis }, dim);
        let term = f.mul(&d_eta);
        transport = Some(match transport {
            None => term,
            Some(acc) => acc.add(&term),
        });
        let sq = f.mul(f);
        squared = Some(match squared {
            None => sq,
            Some(acc) => acc.add(&sq),
        });
    }
    let transport = transport.expect("dimension >= 3");
    let drift_norm = CoefficientField::from_expr(
        Expr::call(crate::coeffparse::Func::Sqrt, vec![squared.expect("dimension >= 3").expr().clone()]),
        dim,
    );
    let grad_norm = CoefficientField::from_expr(Expr::CutoffGradNorm { scale }, dim);
    let potential = eta.mul(&spec.potential).sub(&transport).add(&drift_norm.mul(&grad_norm));
    OperatorSpec {
        dim,
        lambda: spec.lambda,
        diffusion,
        drift,
        potential,
        floors: spec.floors,
        label: format!("{}^({m})", spec.label),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ou_with(h0_star: f64) -> OperatorSpec {
        let base = ornstein_uhlenbeck(3);
        base.with_declared_floors(0.0, h0_star)
    }

    #[test]
    fn laplacian_validates_with_zero_margin() {
        let sample = halton_ball(2_000, 3, 3.0);
        let r = validate(&laplacian(3), &sample).unwrap();
        assert_eq!(r.ellipticity_margin, 0.0);
        assert_eq!(r.h0_margin, 0.0);
        assert_eq!(r.h0_star_margin, 0.0);
        assert!(r.symmetric && r.floors_certified);
    }

    #[test]
    fn ou_floor_is_minus_n() {
        let sample = halton_ball(2_000, 3, 3.0);
        assert!(validate(&ou_with(-3.0), &sample).is_ok());
        match validate(&ou_with(-2.0), &sample) {
            Err(OperatorError::FloorViolation { floor: "H0star", value, .. }) => assert_eq!(value, -3.0),
            other => panic!("expected floor violation, got {other:?}"),
        }
    }

    #[test]
    fn asymmetric_diffusion_rejected_at_construction() {
        let err = OperatorSpec::from_strings(
            3,
            1.0,
            &[vec!["1", "0.1", "0"], vec!["0.2", "1", "0"], vec!["0", "0", "1"]],
            &["0", "0", "0"],
            "0",
        );
        assert!(matches!(err, Err(OperatorError::Symmetry { i: 1, j: 2 })));
    }

    #[test]
    fn ellipticity_violation_names_a_point() {
        let spec = OperatorSpec::from_strings(
            3,
            1.0,
            &[vec!["1 + x1", "0", "0"], vec!["0", "1", "0"], vec!["0", "0", "1"]],
            &["0", "0", "0"],
            "0",
        )
        .unwrap()
        .with_declared_floors(0.0, 0.0);
        match validate(&spec, &halton_ball(500, 3, 2.0)) {
            Err(OperatorError::Ellipticity { point, .. }) => assert!(point[0] < 0.0),
            other => panic!("expected ellipticity error, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_coefficients_are_reported() {
        let spec = OperatorSpec::from_strings(
            3,
            1.0,
            &[vec!["1", "0", "0"], vec!["0", "1", "0"], vec!["0", "0", "1"]],
            &["0", "0", "0"],
            "exp(1000 * x1)",
        )
        .unwrap()
        .with_declared_floors(0.0, 0.0);
        assert!(matches!(
            validate(&spec, &halton_ball(500, 3, 2.0)),
            Err(OperatorError::NonFinite { .. })
        ));
    }

    #[test]
    fn estimated_floors() {
        let sample = halton_ball(3_000, 3, 3.0);
        let e = estimate_floors(&laplacian(3), &sample).unwrap().floors();
        assert_eq!((e.h0.value, e.h0_star.value), (0.0, 0.0));
        let e = estimate_floors(&ornstein_uhlenbeck(3), &sample).unwrap().floors();
        assert_eq!((e.h0.value, e.h0_star.value), (0.0, -3.0));
        assert!(!e.certified());
        let est = estimate_floors(&cubic_drift(3), &sample).unwrap();
        assert!(est.adjoint_infimum.abs() < 1e-12);
        let f = est.floors();
        assert!(f.h0.value == 0.0 && f.h0_star.value.abs() < 1e-12);
    }

    #[test]
    fn positive_floor_is_clamped() {
        let f = Floors::declared(2.0, -1.0);
        assert_eq!(f.h0.value, 0.0);
        assert_eq!(f.h0.raw, 2.0);
        assert!(f.h0.is_clamped() && !f.h0_star.is_clamped());
    }

    #[test]
    fn adjoint_of_laplacian_and_ou() {
        let x = [0.3, -1.2, 2.0];
        let lap = adjoint(&laplacian(3)).unwrap();
        assert_eq!(lap.coefficients_at(&x).unwrap(), laplacian(3).coefficients_at(&x).unwrap());
        let ou = adjoint(&ornstein_uhlenbeck(3)).unwrap();
        let c = ou.coefficients_at(&x).unwrap();
        assert_eq!(c.drift, x.to_vec());
        assert_eq!(c.potential, -3.0);
        let f = ou.floors().unwrap();
        assert_eq!((f.h0.value, f.h0_star.value), (-3.0, 0.0));
    }

    #[test]
    fn adjoint_is_an_involution() {
        for spec in [ornstein_uhlenbeck(3), cubic_drift(3)] {
            let back = adjoint(&adjoint(&spec).unwrap()).unwrap();
            for x in halton_ball(100, 3, 3.0) {
                let a = spec.coefficients_at(&x).unwrap();
                let b = back.coefficients_at(&x).unwrap();
                assert_eq!(a.diffusion, b.diffusion);
                assert_eq!(a.drift, b.drift);
                assert!((a.potential - b.potential).abs() <= 1e-12 * (1.0 + a.potential.abs()));
            }
            assert_eq!(back.floors(), spec.floors());
        }
    }

    #[test]
    fn adjoint_needs_a_differentiable_drift() {
        let spec = OperatorSpec::from_strings(
            3,
            1.0,
            &[vec!["1", "0", "0"], vec!["0", "1", "0"], vec!["0", "0", "1"]],
            &["-x1*norm(x)", "0", "0"],
            "0",
        )
        .unwrap();
        assert!(matches!(adjoint(&spec), Err(OperatorError::Eval { .. })));
    }

    #[test]
    fn approximation_agrees_inside_the_ball() {
        let spec = cubic_drift(3);
        for m in [1u32, 2, 3] {
            let approx = approximate(&spec, m);
            for x in halton_ball(100, 3, f64::from(m)) {
                assert_eq!(approx.coefficients_at(&x).unwrap(), spec.coefficients_at(&x).unwrap());
            }
        }
    }

    #[test]
    fn approximation_is_lambda_identity_far_out() {
        let spec = OperatorSpec::from_strings(
            3,
            0.5,
            &[vec!["1 + x1^2", "0.1", "0"], vec!["0.1", "2", "0"], vec!["0", "0", "1"]],
            &["-x1", "x2^3", "0"],
            "x3^2",
        )
        .unwrap()
        .with_declared_floors(0.0, -1.0);
        let approx = approximate(&spec, 2);
        let x = [7.0, 0.5, -1.0];
        let c = approx.coefficients_at(&x).unwrap();
        assert_eq!(c.diffusion, vec![0.5, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.5]);
        assert_eq!(c.drift, vec![0.0; 3]);
        assert_eq!(c.potential, 0.0);
    }

    #[test]
    fn ou_cutoff_potential_in_the_transition() {
        let spec = ornstein_uhlenbeck(3);
        let approx = approximate(&spec, 1);
        let x = [0.0, 2.0, 0.0];
        let h = approx.potential().eval(&x).unwrap();
        // -F.D eta = x.D eta = -2 * 15/16 and |F||D eta| = 2 * 15/16
        assert!(h.abs() < 1e-14);
        // transport is dominated by |F||D eta|, so H^(m) >= eta H
        for x in halton_ball(300, 3, 3.0) {
            let (eta, _) = cutoff_eta(1.0, &x);
            let h = approx.potential().eval(&x).unwrap();
            assert!(h >= eta * spec.potential().eval(&x).unwrap() - 1e-12);
        }
    }

    #[test]
    fn quadratic_form_examples() {
        let lap = laplacian(3);
        let xi = [1.0, -2.0, 0.5];
        let q = quadratic_form(&lap, &[0.0; 3], &xi, &xi).unwrap();
        assert_eq!(q, 5.25);
    }
}
