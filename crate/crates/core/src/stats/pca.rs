use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::clustering::ZoneAssignment;
use crate::error::{Error, Result};
use crate::transforms::PatternMatrix;

/// Cosine at or above which the first component counts as a uniform shift.
pub const SCALE_SHIFT_COSINE: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    pub mean: Vec<f64>,
    /// Orthonormal principal directions, one per row, by decreasing
    /// eigenvalue. Each is signed so its largest-magnitude entry is positive.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub explained: Vec<f64>,
}

/// Eigen-decomposition of the sample covariance (denominator `n - 1`).
pub fn pca(rows: &PatternMatrix) -> Result<PcaResult> {
    let n = rows.n_rows();
    let t = rows.n_cols();
    if n < 2 {
        return Err(Error::TooFewRows {
            required: 2,
            found: n,
        });
    }
    if t == 0 {
        return Err(Error::InvalidParameter("rows have no columns".into()));
    }
    let mut mean = vec![0.0; t];
    for r in rows.rows() {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut cov = DMatrix::<f64>::zeros(t, t);
    for r in rows.rows() {
        for i in 0..t {
            let di = r[i] - mean[i];
            for j in 0..=i {
                cov[(i, j)] += di * (r[j] - mean[j]);
            }
        }
    }
    for i in 0..t {
        for j in 0..=i {
            let v = cov[(i, j)] / (n - 1) as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..t).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut components = Vec::with_capacity(t);
    let mut eigenvalues = Vec::with_capacity(t);
    for &c in &order {
        let mut v: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
        let pivot = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bv), (i, x)| if x.abs() > bv { (i, x.abs()) } else { (bi, bv) })
            .0;
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        eigenvalues.push(eig.eigenvalues[c].max(0.0));
    }
    let total: f64 = eigenvalues.iter().sum();
    let explained = eigenvalues
        .iter()
        .map(|e| if total > 0.0 { e / total } else { 0.0 })
        .collect();
    Ok(PcaResult {
        mean,
        components,
        eigenvalues,
        explained,
    })
}

/// Coefficient of `v - mean` along component `j`.
pub fn project(p: &PcaResult, v: &[f64], j: usize) -> Result<f64> {
    let comp = p.components.get(j).ok_or(Error::IndexOutOfRange {
        index: j,
        len: p.components.len(),
    })?;
    if v.len() != p.mean.len() {
        return Err(Error::DimensionMismatch {
            expected: p.mean.len(),
            found: v.len(),
        });
    }
    Ok(v.iter()
        .zip(&p.mean)
        .zip(comp)
        .map(|((x, m), e)| (x - m) * e)
        .sum())
}

/// `mean + sum_j coeffs[j] * components[j]`.
pub fn reconstruct(p: &PcaResult, coeffs: &[f64]) -> Vec<f64> {
    let mut out = p.mean.clone();
    for (c, comp) in coeffs.iter().zip(&p.components) {
        for (o, e) in out.iter_mut().zip(comp) {
            *o += c * e;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NearConstant {
    /// `|<e_1, 1/sqrt(T)>|`.
    pub cosine: f64,
    /// The first component is close to a uniform shift of every month.
    pub scale_shift: bool,
}

pub fn near_constant_check(p: &PcaResult) -> NearConstant {
    let e1 = &p.components[0];
    let t = e1.len() as f64;
    let cosine = (e1.iter().sum::<f64>() / t.sqrt()).abs();
    NearConstant {
        cosine,
        scale_shift: cosine >= SCALE_SHIFT_COSINE,
    }
}

/// PCA of each zone's rows.
pub fn zone_pca(rows: &PatternMatrix, z: &ZoneAssignment) -> Result<Vec<PcaResult>> {
    if z.labels.len() != rows.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: rows.n_rows(),
            found: z.labels.len(),
        });
    }
    z.members()
        .iter()
        .enumerate()
        .map(|(zone, m)| {
            if m.is_empty() {
                return Err(Error::EmptyZone(zone));
            }
            pca(&rows.select(m))
        })
        .collect()
}
