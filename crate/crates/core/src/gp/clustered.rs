use serde::{Deserialize, Serialize};

use super::grid::GridSpec;
use super::model::{GpModel, GpSummary};
use crate::clustering::ZoneAssignment;
use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::transforms::mean_log_hec;

pub const MIN_ZONE_MEMBERS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub phi: f64,
    pub log_phi: f64,
    pub mean: f64,
    pub std_err: f64,
    /// `mean - 2 * std_err`.
    pub lo: f64,
    /// `mean + 2 * std_err`.
    pub hi: f64,
}

#[derive(Debug, Clone)]
pub struct ZoneGp {
    pub zone: usize,
    pub model: GpModel,
    pub curve: Vec<CurvePoint>,
}

impl ZoneGp {
    pub fn summary(&self) -> GpSummary {
        self.model.summary()
    }
}

/// `(log10 phi, mean log10 HEC)` for the given records.
pub fn income_consumption_points(ds: &Dataset, rows: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut x = Vec::with_capacity(rows.len());
    let mut y = Vec::with_capacity(rows.len());
    for &i in rows {
        let r = &ds.records[i];
        if !(r.phi > 0.0) {
            return Err(Error::DomainViolation {
                row: i + 1,
                detail: "phi must be positive".into(),
            });
        }
        x.push(r.phi.log10());
        y.push(mean_log_hec(r).map_err(|e| Error::DomainViolation {
            row: i + 1,
            detail: e.to_string(),
        })?);
    }
    Ok((x, y))
}

/// Fits one GP of mean log10 HEC on log10 phi to the given rows and
/// evaluates its curve at `curve_points` evenly spaced log10 phi values
/// spanning the rows' range.
pub fn gp_on_income(
    ds: &Dataset,
    rows: &[usize],
    grid: &GridSpec,
    curve_points: usize,
) -> Result<(GpModel, Vec<CurvePoint>)> {
    let (x, y) = income_consumption_points(ds, rows)?;
    let inputs: Vec<Vec<f64>> = x.iter().map(|&v| vec![v]).collect();
    let model = GpModel::fit(&inputs, &y, grid)?;
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let curve = (0..curve_points)
        .map(|i| {
            let t = if curve_points > 1 {
                i as f64 / (curve_points - 1) as f64
            } else {
                0.5
            };
            let log_phi = lo + t * (hi - lo);
            let p = model.predict_one(&[log_phi]);
            CurvePoint {
                phi: 10f64.powf(log_phi),
                log_phi,
                mean: p.mean,
                std_err: p.std_err,
                lo: p.mean - 2.0 * p.std_err,
                hi: p.mean + 2.0 * p.std_err,
            }
        })
        .collect();
    Ok((model, curve))
}

/// One GP per zone.
pub fn clustered_gp_regression(
    ds: &Dataset,
    z: &ZoneAssignment,
    grid: &GridSpec,
    curve_points: usize,
) -> Result<Vec<ZoneGp>> {
    if z.labels.len() != ds.len() {
        return Err(Error::DimensionMismatch {
            expected: ds.len(),
            found: z.labels.len(),
        });
    }
    z.members()
        .into_iter()
        .enumerate()
        .map(|(zone, rows)| {
            if rows.is_empty() {
                return Err(Error::EmptyZone(zone));
            }
            if rows.len() < MIN_ZONE_MEMBERS {
                return Err(Error::ZoneTooSmall {
                    zone,
                    members: rows.len(),
                    required: MIN_ZONE_MEMBERS,
                });
            }
            let (model, curve) = gp_on_income(ds, &rows, grid, curve_points)?;
            Ok(ZoneGp { zone, model, curve })
        })
        .collect()
}
