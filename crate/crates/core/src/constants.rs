//! Explicit constants of the Gaussian upper bound and their interrelations.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConstantsError {
    #[error("gamma argument {two_k}/2 is outside the supported range 1/2..=150")]
    GammaRange { two_k: u32 },
    #[error("dimension must be at least 3, got {0}")]
    Dimension(u32),
    #[error("lambda must be positive and finite, got {0}")]
    Lambda(f64),
    #[error("floor {name} = {value} is positive; clamp it before computing exponents")]
    PositiveFloor { name: &'static str, value: f64 },
}

/// `Gamma(two_k / 2)` exactly on integers and half-integers.
pub fn gamma_half_integer(two_k: u32) -> Result<f64, ConstantsError> {
    if two_k == 0 || two_k > 300 {
        return Err(ConstantsError::GammaRange { two_k });
    }
    let (mut value, mut arg) = if two_k % 2 == 0 {
        (1.0, 1.0)
    } else {
        (std::f64::consts::PI.sqrt(), 0.5)
    };
    let target = f64::from(two_k) / 2.0;
    while arg < target {
        value *= arg;
        arg += 1.0;
    }
    Ok(value)
}

fn check_dim(n: u32) -> Result<f64, ConstantsError> {
    if n < 3 {
        return Err(ConstantsError::Dimension(n));
    }
    Ok(f64::from(n))
}

fn check_lambda(lambda: f64) -> Result<f64, ConstantsError> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(lambda)
    } else {
        Err(ConstantsError::Lambda(lambda))
    }
}

/// `4^((N-1)/N) pi^((N+1)/N) N (N-2) / Gamma((N+1)/2)^(2/N)`, as printed.
pub fn sobolev_constant_paper(n: u32) -> Result<f64, ConstantsError> {
    let nf = check_dim(n)?;
    let g = gamma_half_integer(n + 1)?;
    Ok(4f64.powf((nf - 1.0) / nf) * std::f64::consts::PI.powf((nf + 1.0) / nf) * nf * (nf - 2.0)
        / g.powf(2.0 / nf))
}

/// Sharp constant `pi N (N-2) (Gamma(N/2) / Gamma(N))^(2/N)`.
pub fn sobolev_constant_sharp(n: u32) -> Result<f64, ConstantsError> {
    let nf = check_dim(n)?;
    let ratio = gamma_half_integer(n)? / gamma_half_integer(2 * n)?;
    Ok(std::f64::consts::PI * nf * (nf - 2.0) * ratio.powf(2.0 / nf))
}

fn kernel_denominator(nf: f64, lambda: f64) -> f64 {
    std::f64::consts::PI.powf((nf + 1.0) / 2.0) * (lambda * (nf - 2.0)).powf(nf / 2.0)
}

/// Closed-form constant of the L2 estimate:
/// `2^((N-2)/2) Gamma((N+1)/2) / (pi^((N+1)/2) (lambda (N-2))^(N/2))`.
pub fn lemma_constant(n: u32, lambda: f64) -> Result<f64, ConstantsError> {
    let nf = check_dim(n)?;
    let lambda = check_lambda(lambda)?;
    Ok(2f64.powf((nf - 2.0) / 2.0) * gamma_half_integer(n + 1)? / kernel_denominator(nf, lambda))
}

/// Constant of the pointwise bound:
/// `2^(N-1) Gamma((N+1)/2) / (pi^((N+1)/2) (lambda (N-2))^(N/2))`.
pub fn main_constant(n: u32, lambda: f64) -> Result<f64, ConstantsError> {
    let nf = check_dim(n)?;
    let lambda = check_lambda(lambda)?;
    Ok(2f64.powf(nf - 1.0) * gamma_half_integer(n + 1)? / kernel_denominator(nf, lambda))
}

/// `(N / (2 lambda S))^(N/2)`.
pub fn constant_from_sobolev(n: u32, lambda: f64, s: f64) -> Result<f64, ConstantsError> {
    let nf = check_dim(n)?;
    let lambda = check_lambda(lambda)?;
    Ok((nf / (2.0 * lambda * s)).powf(nf / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exponents {
    pub gamma: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub theta: f64,
}

pub fn exponents(h0: f64, h0_star: f64) -> Result<Exponents, ConstantsError> {
    if h0 > 0.0 {
        return Err(ConstantsError::PositiveFloor { name: "H0", value: h0 });
    }
    if h0_star > 0.0 {
        return Err(ConstantsError::PositiveFloor { name: "H0star", value: h0_star });
    }
    let e = Exponents {
        gamma: -0.75 * (h0_star + h0),
        gamma1: -h0_star - 2.0 * h0,
        gamma2: -2.0 * h0_star - h0,
        theta: h0_star + h0,
    };
    debug_assert!((e.gamma - (e.gamma1 + e.gamma2) / 4.0).abs() <= 1e-15 * (1.0 + e.gamma.abs()));
    Ok(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantsBundle {
    #[serde(rename = "N")]
    pub n: u32,
    pub lambda: f64,
    #[serde(rename = "H0")]
    pub h0: f64,
    #[serde(rename = "H0star")]
    pub h0_star: f64,
    #[serde(rename = "S_paper")]
    pub s_paper: f64,
    #[serde(rename = "S_sharp")]
    pub s_sharp: f64,
    #[serde(rename = "C_closed")]
    pub c_closed: f64,
    #[serde(rename = "C_from_S_paper")]
    pub c_from_s_paper: f64,
    #[serde(rename = "C_from_S_sharp")]
    pub c_from_s_sharp: f64,
    #[serde(rename = "C_main")]
    pub c_main: f64,
    pub gamma: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub theta: f64,
}

impl ConstantsBundle {
    pub fn new(n: u32, lambda: f64, h0: f64, h0_star: f64) -> Result<ConstantsBundle, ConstantsError> {
        let s_paper = sobolev_constant_paper(n)?;
        let s_sharp = sobolev_constant_sharp(n)?;
        let e = exponents(h0, h0_star)?;
        Ok(ConstantsBundle {
            n,
            lambda,
            h0,
            h0_star,
            s_paper,
            s_sharp,
            c_closed: lemma_constant(n, lambda)?,
            c_from_s_paper: constant_from_sobolev(n, lambda, s_paper)?,
            c_from_s_sharp: constant_from_sobolev(n, lambda, s_sharp)?,
            c_main: main_constant(n, lambda)?,
            gamma: e.gamma,
            gamma1: e.gamma1,
            gamma2: e.gamma2,
            theta: e.theta,
        })
    }

    /// `C_main e^(gamma t) t^(-N/2)`.
    pub fn pointwise_bound(&self, t: f64) -> f64 {
        self.c_main * (self.gamma * t).exp() * t.powf(-f64::from(self.n) / 2.0)
    }

    /// `C_closed e^(rate t) t^(-N/2)` for rate `gamma1` or `gamma2`.
    pub fn l2_bound(&self, rate: f64, t: f64) -> f64 {
        self.c_closed * (rate * t).exp() * t.powf(-f64::from(self.n) / 2.0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    #[serde(rename = "N")]
    pub n: u32,
    pub lambda: f64,
    pub c_closed: f64,
    pub c_from_s_paper: f64,
    pub c_from_s_sharp: f64,
    pub c_main: f64,
    /// `C_closed / C_from_S_paper`; equals `2^(2N-2)`.
    pub paper_route_ratio: f64,
    pub expected_ratio: f64,
    pub sharp_route_relative_error: f64,
    pub main_over_closed: f64,
    pub sharp_route_matches: bool,
    pub paper_route_matches: bool,
}

pub fn consistency_report(n: u32, lambda: f64) -> Result<ConsistencyReport, ConstantsError> {
    let c_closed = lemma_constant(n, lambda)?;
    let c_from_s_paper = constant_from_sobolev(n, lambda, sobolev_constant_paper(n)?)?;
    let c_from_s_sharp = constant_from_sobolev(n, lambda, sobolev_constant_sharp(n)?)?;
    let c_main = main_constant(n, lambda)?;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let sharp_err = rel(c_from_s_sharp, c_closed);
    Ok(ConsistencyReport {
        n,
        lambda,
        c_closed,
        c_from_s_paper,
        c_from_s_sharp,
        c_main,
        paper_route_ratio: c_closed / c_from_s_paper,
        expected_ratio: 2f64.powi(2 * n as i32 - 2),
        sharp_route_relative_error: sharp_err,
        main_over_closed: c_main / c_closed,
        sharp_route_matches: sharp_err <= 1e-10,
        paper_route_matches: rel(c_from_s_paper, c_closed) <= 1e-10,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn gamma_values() {
        assert_eq!(gamma_half_integer(4).unwrap(), 1.0);
        assert_eq!(gamma_half_integer(2).unwrap(), 1.0);
        assert_eq!(gamma_half_integer(10).unwrap(), 24.0);
        assert!(rel(gamma_half_integer(1).unwrap(), 1.772_453_850_905_516) < 1e-15);
        assert!(rel(gamma_half_integer(5).unwrap(), 0.75 * PI.sqrt()) < 1e-15);
        assert!(gamma_half_integer(300).unwrap().is_finite());
        assert_eq!(gamma_half_integer(301), Err(ConstantsError::GammaRange { two_k: 301 }));
        assert!(gamma_half_integer(0).is_err());
    }

    #[test]
    fn sobolev_constants() {
        let s3 = sobolev_constant_paper(3).unwrap();
        let direct = 4f64.powf(2.0 / 3.0) * PI.powf(4.0 / 3.0) * 3.0;
        assert!(rel(s3, direct) < 1e-14);
        assert!((s3 - 34.785).abs() < 5e-3);
        let s4 = sobolev_constant_paper(4).unwrap();
        let g52 = 0.75 * PI.sqrt();
        assert!(rel(s4, 4f64.powf(0.75) * PI.powf(1.25) * 8.0 / g52.sqrt()) < 1e-14);
        for n in 3..10 {
            assert!(sobolev_constant_paper(n + 1).unwrap() > sobolev_constant_paper(n).unwrap());
        }
        let sharp = sobolev_constant_sharp(3).unwrap();
        assert!(rel(sharp, 3.0 * PI * (0.5 * PI.sqrt() / 2.0).powf(2.0 / 3.0)) < 1e-14);
        assert!((sharp - 5.4779).abs() < 1e-4);
        assert!(sharp < s3);
    }

    #[test]
    fn kernel_constants_n3() {
        assert!(rel(lemma_constant(3, 1.0).unwrap(), 2f64.sqrt() / (PI * PI)) < 1e-14);
        assert!(rel(main_constant(3, 1.0).unwrap(), 4.0 / (PI * PI)) < 1e-14);
        let via_sharp = constant_from_sobolev(3, 1.0, sobolev_constant_sharp(3).unwrap()).unwrap();
        assert!(rel(via_sharp, 0.143_289) < 1e-5);
        assert!(rel(via_sharp, lemma_constant(3, 1.0).unwrap()) < 1e-12);
    }

    #[test]
    fn lambda_scaling_and_limit() {
        for n in 3..=8 {
            let c1 = lemma_constant(n, 1.3).unwrap();
            let c2 = lemma_constant(n, 2.6).unwrap();
            assert!(rel(c2, 2f64.powf(-f64::from(n) / 2.0) * c1) < 1e-13);
        }
        assert!(main_constant(3, 1e12).unwrap() < 1e-15);
    }

    #[test]
    fn main_and_closed_relation() {
        for n in 3..=8 {
            for lambda in [0.1, 1.0, 10.0] {
                let r = main_constant(n, lambda).unwrap() / lemma_constant(n, lambda).unwrap();
                assert!(rel(r, 2f64.powf(f64::from(n) / 2.0)) < 1e-12);
            }
        }
    }

    #[test]
    fn exponent_examples() {
        let e = exponents(0.0, 0.0).unwrap();
        assert_eq!((e.gamma, e.gamma1, e.gamma2, e.theta), (0.0, 0.0, 0.0, 0.0));
        let e = exponents(0.0, -3.0).unwrap();
        assert_eq!((e.gamma, e.gamma1, e.gamma2, e.theta), (2.25, 3.0, 6.0, -3.0));
        let e = exponents(-1.0, -1.0).unwrap();
        assert_eq!((e.gamma, e.gamma1, e.gamma2, e.theta), (1.5, 3.0, 3.0, -2.0));
        assert!(exponents(0.5, 0.0).is_err());
        assert!(exponents(0.0, 1e-3).is_err());
    }

    #[test]
    fn consistency_tables() {
        let r3 = consistency_report(3, 1.0).unwrap();
        assert!((r3.c_from_s_paper - 0.008_957).abs() < 2e-6);
        assert!(rel(r3.c_from_s_paper, 0.008_955_612_003_918) < 1e-11);
        assert!(rel(r3.paper_route_ratio, 16.0) < 1e-12);
        let r4 = consistency_report(4, 1.0).unwrap();
        assert!(rel(r4.paper_route_ratio, 64.0) < 1e-12);
        for n in 3..=8 {
            let r = consistency_report(n, 1.0).unwrap();
            assert!(r.sharp_route_matches && !r.paper_route_matches);
            assert!(r.sharp_route_relative_error < 1e-12);
            assert!(rel(r.paper_route_ratio, r.expected_ratio) < 1e-12);
        }
    }

    #[test]
    fn bundle_is_positive_and_finite() {
        for n in 3..=8 {
            for lambda in [0.1, 1.0, 10.0] {
                let b = ConstantsBundle::new(n, lambda, -0.5, -2.0).unwrap();
                for v in [b.s_paper, b.s_sharp, b.c_closed, b.c_from_s_paper, b.c_from_s_sharp, b.c_main] {
                    assert!(v > 0.0 && v.is_finite());
                }
                assert!(b.gamma >= 0.0 && b.gamma1 >= 0.0 && b.gamma2 >= 0.0 && b.theta <= 0.0);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(main_constant(2, 1.0), Err(ConstantsError::Dimension(2)));
        assert!(lemma_constant(3, 0.0).is_err());
        assert!(lemma_constant(3, f64::NAN).is_err());
    }
}
