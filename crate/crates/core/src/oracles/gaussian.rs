use std::f64::consts::PI;

use super::OracleError;

/// Heat kernel of `sum D_ii` on `R^N`: `(4 pi t)^(-N/2) exp(-|x-y|^2 / 4t)`.
pub fn gaussian_kernel(x: &[f64], y: &[f64], t: f64, dim: usize) -> Result<f64, OracleError> {
    if !(t > 0.0) {
        return Err(OracleError::Time(t));
    }
    if x.len() != dim || y.len() != dim {
        return Err(OracleError::Dimension { expected: dim, got: x.len().min(y.len()) });
    }
    let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((4.0 * PI * t).powf(-(dim as f64) / 2.0) * (-r2 / (4.0 * t)).exp())
}

/// The Gaussian kernel convolved with an isotropic Gaussian of standard
/// deviation `bandwidth`, i.e. what a kernel density estimate converges to.
pub fn smoothed_gaussian_kernel(x: &[f64], y: &[f64], t: f64, bandwidth: f64) -> Result<f64, OracleError> {
    if !(t > 0.0) {
        return Err(OracleError::Time(t));
    }
    let var = 2.0 * t + bandwidth * bandwidth;
    let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((2.0 * PI * var).powf(-(x.len() as f64) / 2.0) * (-r2 / (2.0 * var)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn center_value() {
        let v = gaussian_kernel(&[0.0; 3], &[0.0; 3], 1.0, 3).unwrap();
        assert!((v - 0.022_449).abs() < 1e-6);
        assert!((v - (4.0 * PI).powf(-1.5)).abs() < 1e-16);
        assert!(gaussian_kernel(&[0.0; 3], &[0.0; 3], 0.0, 3).is_err());
        assert!(gaussian_kernel(&[0.0; 3], &[0.0; 3], -1.0, 3).is_err());
    }

    #[test]
    fn unit_mass_by_quadrature() {
        let h = 0.1;
        let t = 0.7;
        let m = 75;
        let mut s = 0.0;
        for i in -m..=m {
            for j in -m..=m {
                for k in -m..=m {
                    let y = [i as f64 * h, j as f64 * h, k as f64 * h];
                    s += gaussian_kernel(&[0.2, -0.1, 0.0], &y, t, 3).unwrap();
                }
            }
        }
        assert!((s * h * h * h - 1.0).abs() < 1e-6);
    }

    #[test]
    fn below_the_main_bound_at_the_diagonal() {
        let c = crate::constants::main_constant(3, 1.0).unwrap();
        let ratio = gaussian_kernel(&[0.0; 3], &[0.0; 3], 1.0, 3).unwrap() / c;
        assert!((ratio - 0.0554).abs() < 1e-4);
        for t in [0.01, 0.5, 3.0] {
            let v = gaussian_kernel(&[0.0; 3], &[0.0; 3], t, 3).unwrap();
            assert!(v <= c * t.powf(-1.5));
        }
    }

    #[test]
    fn smoothing_with_zero_bandwidth_is_the_kernel() {
        let x = [0.1, 0.2, -0.3];
        let y = [1.0, 0.0, 0.5];
        let a = gaussian_kernel(&x, &y, 0.4, 3).unwrap();
        let b = smoothed_gaussian_kernel(&x, &y, 0.4, 0.0).unwrap();
        assert!((a - b).abs() < 1e-15);
    }
}
