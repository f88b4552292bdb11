//! Compressed sparse rows and a Jacobi-preconditioned BiCGStab.

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    /// Builds from per-row `(column, value)` lists; duplicate columns are summed
    /// in the order given.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Csr {
        let n = rows.len();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let start = indices.len();
            for (c, v) in row {
                assert!(c < n, "column {c} out of range");
                if indices.len() > start && *indices.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Csr { n, indptr, indices, values }
    }

    pub fn identity(n: usize) -> Csr {
        Csr::from_rows((0..n).map(|i| vec![(i, 1.0)]).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Rows are independent, so the parallel product is bitwise deterministic.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().with_min_len(1024).enumerate().for_each(|(i, yi)| {
            let mut s = 0.0;
            for k in self.indptr[i]..self.indptr[i + 1] {
                s += self.values[k] * x[self.indices[k]];
            }
            *yi = s;
        });
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Csr {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                rows[j].push((i, v));
            }
        }
        Csr::from_rows(rows)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                s[j] += v;
            }
        }
        s
    }

    /// `alpha * self + beta * other` on the union pattern.
    pub fn combine(&self, alpha: f64, other: &Csr, beta: f64) -> Csr {
        assert_eq!(self.n, other.n);
        let rows = (0..self.n)
            .map(|i| {
                let mut r: Vec<(usize, f64)> = self.row(i).map(|(j, v)| (j, alpha * v)).collect();
                r.extend(other.row(i).map(|(j, v)| (j, beta * v)));
                r
            })
            .collect();
        Csr::from_rows(rows)
    }

    pub fn scaled(&self, alpha: f64) -> Csr {
        Csr { values: self.values.iter().map(|v| alpha * v).collect(), ..self.clone() }
    }

    /// Adds `d[i]` to each diagonal entry.
    pub fn add_diagonal(&self, d: &[f64]) -> Csr {
        let rows = (0..self.n)
            .map(|i| {
                let mut r: Vec<(usize, f64)> = self.row(i).collect();
                r.push((i, d[i]));
                r
            })
            .collect();
        Csr::from_rows(rows)
    }

    /// Restriction to the rows and columns listed in `keep`.
    pub fn principal_submatrix(&self, keep: &[usize]) -> Csr {
        let mut pos = vec![usize::MAX; self.n];
        for (k, &i) in keep.iter().enumerate() {
            pos[i] = k;
        }
        let rows = keep
            .iter()
            .map(|&i| self.row(i).filter(|&(j, _)| pos[j] != usize::MAX).map(|(j, v)| (pos[j], v)).collect())
            .collect();
        Csr::from_rows(rows)
    }

    pub fn max_abs_difference(&self, other: &Csr) -> f64 {
        let d = self.combine(1.0, other, -1.0);
        d.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverSettings {
    fn default() -> SolverSettings {
        SolverSettings { tolerance: 1e-10, max_iterations: 10_000 }
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("BiCGStab did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64, history: Vec<f64> },
    #[error("BiCGStab broke down at iteration {iteration} ({what})")]
    Breakdown { iteration: usize, what: &'static str },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `a x = b` starting from the given `x`. Returns the iteration count.
pub fn bicgstab(a: &Csr, b: &[f64], x: &mut [f64], settings: SolverSettings) -> Result<usize, SolverError> {
    let n = a.n();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| if *d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut r = a.matvec(x);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut residual = norm(&r) / bnorm;
    if residual <= settings.tolerance {
        return Ok(0);
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut history = Vec::new();
    for iteration in 1..=settings.max_iterations {
        let rho_next = dot(&r_hat, &r);
        if rho_next == 0.0 {
            return Err(SolverError::Breakdown { iteration, what: "rho vanished" });
        }
        let beta = (rho_next / rho) * (alpha / omega);
        rho = rho_next;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = inv_diag[i] * p[i];
        }
        a.matvec_into(&y, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 {
            return Err(SolverError::Breakdown { iteration, what: "r_hat orthogonal to v" });
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) / bnorm <= settings.tolerance {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return Ok(iteration);
        }
        for i in 0..n {
            z[i] = inv_diag[i] * s[i];
        }
        a.matvec_into(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        residual = norm(&r) / bnorm;
        history.push(residual);
        if residual <= settings.tolerance {
            return Ok(iteration);
        }
        if omega == 0.0 {
            return Err(SolverError::Breakdown { iteration, what: "omega vanished" });
        }
    }
    Err(SolverError::NoConvergence { iterations: settings.max_iterations, residual, history })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiagonal(n: usize, lower: f64, diag: f64, upper: f64) -> Csr {
        Csr::from_rows(
            (0..n)
                .map(|i| {
                    let mut r = vec![(i, diag)];
                    if i > 0 {
                        r.push((i - 1, lower));
                    }
                    if i + 1 < n {
                        r.push((i + 1, upper));
                    }
                    r
                })
                .collect(),
        )
    }

    #[test]
    fn duplicates_are_summed_and_sorted() {
        let m = Csr::from_rows(vec![vec![(1, 2.0), (0, 1.0), (1, 3.0)], vec![(1, 4.0)]]);
        assert_eq!(m.get(0, 1), 5.0);
        assert_eq!(m.row(0).collect::<Vec<_>>(), vec![(0, 1.0), (1, 5.0)]);
        assert_eq!(m.get(1, 0), 0.0);
    }

    #[test]
    fn transpose_and_sums() {
        let m = tridiagonal(5, -1.0, 3.0, -0.5);
        let t = m.transpose();
        assert_eq!(t.get(0, 1), -1.0);
        assert_eq!(t.get(1, 0), -0.5);
        assert_eq!(m.row_sums(), t.col_sums());
        assert_eq!(t.transpose(), m);
    }

    #[test]
    fn solves_nonsymmetric_system() {
        let n = 200;
        let a = tridiagonal(n, -1.3, 3.0, -0.4);
        let truth: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).sin()).collect();
        let b = a.matvec(&truth);
        let mut x = vec![0.0; n];
        bicgstab(&a, &b, &mut x, SolverSettings::default()).unwrap();
        let err = x.iter().zip(&truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = tridiagonal(10, -1.0, 3.0, -1.0);
        let mut x = vec![1.0; 10];
        assert_eq!(bicgstab(&a, &[0.0; 10], &mut x, SolverSettings::default()).unwrap(), 0);
        assert!(x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let a = tridiagonal(400, -1.0, 2.0001, -1.0);
        let b = vec![1.0; 400];
        let mut x = vec![0.0; 400];
        let err = bicgstab(&a, &b, &mut x, SolverSettings { tolerance: 1e-14, max_iterations: 3 });
        assert!(matches!(err, Err(SolverError::NoConvergence { iterations: 3, .. })));
    }

    #[test]
    fn principal_submatrix_keeps_entries() {
        let m = tridiagonal(5, -1.0, 3.0, -0.5);
        let s = m.principal_submatrix(&[1, 2, 4]);
        assert_eq!(s.get(0, 1), -0.5);
        assert_eq!(s.get(1, 0), -1.0);
        assert_eq!(s.get(2, 2), 3.0);
        assert_eq!(s.get(1, 2), 0.0);
    }
}
