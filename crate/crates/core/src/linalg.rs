//! Dense Cholesky factorization for kernel matrices.

use crate::error::{Error, Result};

/// Smallest and largest diagonal jitter, relative to `trace / n`.
pub const JITTER_START: f64 = 1e-10;
pub const JITTER_MAX: f64 = 1e-4;

/// Lower-triangular factor `L` with `L L^T = A + jitter I`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
    jitter: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Cholesky {
    /// Plain factorization; `None` unless every pivot is strictly positive.
    pub fn factor(a: &[f64], n: usize) -> Option<Self> {
        Self::factor_shifted(a, n, 0.0)
    }

    fn factor_shifted(a: &[f64], n: usize, shift: f64) -> Option<Self> {
        assert_eq!(a.len(), n * n, "matrix must be n x n");
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let s = a[i * n + j] - dot(&l[i * n..i * n + j], &l[j * n..j * n + j]);
                if i == j {
                    let d = s + shift;
                    if !(d > 0.0) || !d.is_finite() {
                        return None;
                    }
                    l[i * n + i] = d.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Some(Self { n, l, jitter: shift })
    }

    /// Factors `A` as is when possible, else `A + jitter I` with jitter
    /// starting at `1e-10 * trace(A)/n` and growing tenfold up to
    /// `1e-4 * trace(A)/n`.
    pub fn factor_with_jitter(a: &[f64], n: usize) -> Result<Self> {
        if let Some(c) = Self::factor(a, n) {
            return Ok(c);
        }
        let trace: f64 = (0..n).map(|i| a[i * n + i]).sum();
        let scale = if trace > 0.0 { trace / n as f64 } else { 1.0 };
        let mut rel = JITTER_START;
        loop {
            if let Some(c) = Self::factor_shifted(a, n, rel * scale) {
                return Ok(c);
            }
            if rel >= JITTER_MAX * (1.0 - 1e-9) {
                return Err(Error::SingularKernel { jitter: rel * scale });
            }
            rel *= 10.0;
        }
    }

    /// Factorization of a positive semidefinite matrix: pivots below
    /// `1e-10 * max diag` are treated as exact zeros and their column is
    /// zeroed. Falls back to [`Cholesky::factor_with_jitter`] if a pivot
    /// below `-1e-6 * max diag` appears.
    pub fn factor_semidefinite(a: &[f64], n: usize) -> Result<Self> {
        let max_diag = (0..n).map(|i| a[i * n + i]).fold(0.0, f64::max);
        let tol = 1e-10 * max_diag;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let s = a[i * n + j] - dot(&l[i * n..i * n + j], &l[j * n..j * n + j]);
                if i == j {
                    if s > tol {
                        l[i * n + i] = s.sqrt();
                    } else if s < -1e-6 * max_diag {
                        return Self::factor_with_jitter(a, n);
                    }
                } else if l[j * n + j] > 0.0 {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l, jitter: 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn lower(&self) -> &[f64] {
        &self.l
    }

    /// `L z`.
    pub fn mul_lower(&self, z: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| dot(&self.l[i * self.n..i * self.n + i + 1], &z[..=i]))
            .collect()
    }

    /// Solves `L x = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n {
            let s = x[i] - dot(&self.l[i * n..i * n + i], &x[..i]);
            x[i] = s / self.l[i * n + i];
        }
        x
    }

    /// Solves `L^T x = b`.
    pub fn solve_upper(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            x[i] /= self.l[i * n + i];
            let xi = x[i];
            for k in 0..i {
                x[k] -= self.l[i * n + k] * xi;
            }
        }
        x
    }

    /// Solves `(L L^T) x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// `log det(L L^T)`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.l[i * self.n + i].ln()).sum::<f64>()
    }
}
