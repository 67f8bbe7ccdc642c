use serde::{Deserialize, Serialize};

use crate::clustering::ZoneAssignment;
use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::transforms::mean_log_hec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n: usize,
    /// `sqrt(SSE / (n - 2))`.
    pub residual_sd: f64,
    pub slope_se: f64,
}

impl RegressionModel {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Simple least-squares line `y ~ slope * x + intercept`.
pub fn ols(x: &[f64], y: &[f64]) -> Result<RegressionModel> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::TooFewRows {
            required: 3,
            found: n,
        });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if !(sxx > 0.0) {
        return Err(Error::DegenerateX);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r2 = if syy > 0.0 {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let residual_sd = (sse / (nf - 2.0)).sqrt();
    Ok(RegressionModel {
        slope,
        intercept,
        r2,
        n,
        residual_sd,
        slope_se: residual_sd / sxx.sqrt(),
    })
}

/// Income covariate used as the regressor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Covariate {
    /// Income per household.
    #[default]
    Phi,
    /// Income per capita.
    Pci,
}

/// `(log10 covariate, mean log10 HEC)` per record.
pub fn regression_points(ds: &Dataset, covariate: Covariate) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut x = Vec::with_capacity(ds.len());
    let mut y = Vec::with_capacity(ds.len());
    for (i, r) in ds.records.iter().enumerate() {
        let income = match covariate {
            Covariate::Phi => r.phi,
            Covariate::Pci => r.pci,
        };
        if !(income > 0.0) {
            return Err(Error::DomainViolation {
                row: i + 1,
                detail: "income must be positive".into(),
            });
        }
        x.push(income.log10());
        y.push(mean_log_hec(r).map_err(|e| Error::DomainViolation {
            row: i + 1,
            detail: e.to_string(),
        })?);
    }
    Ok((x, y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteredRegression {
    pub covariate: Covariate,
    pub overall: RegressionModel,
    pub zones: Vec<RegressionModel>,
}

/// Pooled and per-zone OLS of mean log10 HEC on log10 income.
pub fn clustered_regression(
    ds: &Dataset,
    z: &ZoneAssignment,
    covariate: Covariate,
) -> Result<ClusteredRegression> {
    if z.labels.len() != ds.len() {
        return Err(Error::DimensionMismatch {
            expected: ds.len(),
            found: z.labels.len(),
        });
    }
    let (x, y) = regression_points(ds, covariate)?;
    let overall = ols(&x, &y)?;
    let zones = z
        .members()
        .into_iter()
        .enumerate()
        .map(|(zone, rows)| {
            if rows.is_empty() {
                return Err(Error::EmptyZone(zone));
            }
            if rows.len() < 3 {
                return Err(Error::ZoneTooSmall {
                    zone,
                    members: rows.len(),
                    required: 3,
                });
            }
            let zx: Vec<f64> = rows.iter().map(|&i| x[i]).collect();
            let zy: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
            ols(&zx, &zy)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClusteredRegression {
        covariate,
        overall,
        zones,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let m = ols(&x, &y).unwrap();
        assert!((m.slope - 2.0).abs() < 1e-12);
        assert!((m.intercept - 1.0).abs() < 1e-12);
        assert!((m.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_normal_equations() {
        // xbar = 1, ybar = 2/3, Sxx = 2, Sxy = 1, Syy = 2/3
        let m = ols(&[0.0, 1.0, 2.0], &[0.0, 1.0, 1.0]).unwrap();
        assert!((m.slope - 0.5).abs() < 1e-12);
        assert!((m.intercept - 1.0 / 6.0).abs() < 1e-12);
        assert!((m.r2 - 0.75).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(ols(&[1.0; 4], &[1.0, 2.0, 3.0, 4.0]), Err(Error::DegenerateX)));
        assert!(matches!(ols(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::TooFewRows { .. })));
    }

    proptest! {
        #[test]
        fn residuals_satisfy_normal_equations(pts in prop::collection::vec((-10f64..10.0, -10f64..10.0), 3..50)) {
            let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            prop_assume!(x.iter().any(|v| (v - x[0]).abs() > 1e-3));
            let m = ols(&x, &y).unwrap();
            let res: Vec<f64> = x.iter().zip(&y).map(|(a, b)| b - m.predict(*a)).collect();
            let sum: f64 = res.iter().sum();
            let dot: f64 = res.iter().zip(&x).map(|(r, a)| r * a).sum();
            prop_assert!(sum.abs() < 1e-9);
            prop_assert!(dot.abs() < 1e-9);
            let my = y.iter().sum::<f64>() / y.len() as f64;
            let sst: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
            let sse: f64 = res.iter().map(|r| r * r).sum();
            if sst > 1e-9 {
                prop_assert!((m.r2 - (1.0 - sse / sst)).abs() < 1e-9);
            }
            prop_assert!((0.0..=1.0).contains(&m.r2));
        }
    }
}
