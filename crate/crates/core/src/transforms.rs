//! Household consumption, log transforms, sum-to-one normalization and
//! monthly averaging.
//!
//! Logarithms here are base 10. The canonical clustering input is
//! `normalize_sum1(log_hec_pattern(record))`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::clustering::ZoneAssignment;
use crate::error::{Error, Result};
use crate::ingest::{BlockGroupRecord, Dataset};

pub const MONTHS_PER_YEAR: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    RawLogHec,
    NormalizedLogHec,
    MonthlyAvgLogHec,
}

/// Row-major `n x T` matrix of per-block-group patterns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternMatrix {
    kind: PatternKind,
    ids: Vec<String>,
    cols: usize,
    values: Vec<f64>,
}

impl PatternMatrix {
    /// Builds a matrix from rows, enforcing the invariants of `kind`.
    pub fn from_rows(kind: PatternKind, ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if ids.len() != rows.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                found: ids.len(),
            });
        }
        let cols = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != cols {
                return Err(Error::LengthMismatch {
                    row: i + 1,
                    detail: format!("expected {cols} values, found {}", row.len()),
                });
            }
            values.extend(row);
        }
        let m = Self {
            kind,
            ids,
            cols,
            values,
        };
        m.check_kind()?;
        Ok(m)
    }

    /// Rows with positional ids `"0"`, `"1"`, ... Convenient for data that
    /// does not come from a [`Dataset`].
    pub fn unlabeled(kind: PatternKind, rows: Vec<Vec<f64>>) -> Result<Self> {
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::from_rows(kind, ids, rows)
    }

    fn check_kind(&self) -> Result<()> {
        match self.kind {
            PatternKind::NormalizedLogHec => {
                for (i, row) in self.rows().enumerate() {
                    let s: f64 = row.iter().sum();
                    if (s - 1.0).abs() > 1e-9 {
                        return Err(Error::InvalidParameter(format!(
                            "normalized row {i} sums to {s}"
                        )));
                    }
                }
            }
            PatternKind::MonthlyAvgLogHec if self.cols != MONTHS_PER_YEAR && !self.ids.is_empty() => {
                return Err(Error::DimensionMismatch {
                    expected: MONTHS_PER_YEAR,
                    found: self.cols,
                });
            }
            _ => {}
        }
        Ok(())
    }

    pub fn kind(&self) -> PatternKind {
        self.kind
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// New matrix containing `indices` rows, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        let mut ids = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            ids.push(self.ids[i].clone());
        }
        Self {
            kind: self.kind,
            ids,
            cols: self.cols,
            values,
        }
    }

    pub fn min_max(&self) -> Option<(f64, f64)> {
        self.values.iter().fold(None, |acc, &v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }

    /// CSV with a leading `id` column then `m_1..m_T`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["id".to_owned()];
        header.extend((1..=self.cols).map(|t| format!("m_{t}")));
        w.write_record(&header)?;
        for (id, row) in self.ids.iter().zip(self.rows()) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Consumption per household.
pub fn hec(ec: f64, households: u32) -> Result<f64> {
    if households < 1 {
        return Err(Error::DomainViolation {
            row: 0,
            detail: "household count must be at least 1".into(),
        });
    }
    Ok(ec / f64::from(households))
}

/// `log10(ec[t] / households[t])` for every month.
pub fn log_hec_pattern(rec: &BlockGroupRecord) -> Result<Vec<f64>> {
    rec.ec
        .iter()
        .zip(&rec.households)
        .enumerate()
        .map(|(t, (&ec, &hh))| {
            if ec <= 0.0 {
                return Err(Error::NonpositiveConsumption { month: t + 1 });
            }
            Ok(hec(ec, hh)?.log10())
        })
        .collect()
}

pub fn normalize_sum1(v: &[f64]) -> Result<Vec<f64>> {
    let s: f64 = v.iter().sum();
    if !(s > 0.0) {
        return Err(Error::NonpositiveSum(s));
    }
    Ok(v.iter().map(|x| x / s).collect())
}

/// Averages each calendar month across years. The input length must be a
/// positive multiple of 12 (72 for six years of data).
pub fn monthly_average(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() || !v.len().is_multiple_of(MONTHS_PER_YEAR) {
        return Err(Error::LengthMismatch {
            row: 0,
            detail: format!("{} values is not a whole number of years", v.len()),
        });
    }
    let years = (v.len() / MONTHS_PER_YEAR) as f64;
    let mut out = vec![0.0; MONTHS_PER_YEAR];
    for chunk in v.chunks_exact(MONTHS_PER_YEAR) {
        for (o, x) in out.iter_mut().zip(chunk) {
            *o += x;
        }
    }
    out.iter_mut().for_each(|o| *o /= years);
    Ok(out)
}

pub fn raw_log_hec_matrix(ds: &Dataset) -> Result<PatternMatrix> {
    let rows = ds
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| log_hec_pattern(r).map_err(|e| with_row(e, i + 1)))
        .collect::<Result<Vec<_>>>()?;
    PatternMatrix::from_rows(PatternKind::RawLogHec, ds.ids(), rows)
}

pub fn normalized_log_hec_matrix(ds: &Dataset) -> Result<PatternMatrix> {
    let raw = raw_log_hec_matrix(ds)?;
    let rows = raw
        .rows()
        .map(normalize_sum1)
        .collect::<Result<Vec<_>>>()?;
    PatternMatrix::from_rows(PatternKind::NormalizedLogHec, ds.ids(), rows)
}

pub fn monthly_avg_log_hec_matrix(ds: &Dataset) -> Result<PatternMatrix> {
    let raw = raw_log_hec_matrix(ds)?;
    monthly_avg_matrix(&raw)
}

pub fn monthly_avg_matrix(patterns: &PatternMatrix) -> Result<PatternMatrix> {
    let rows = patterns
        .rows()
        .map(monthly_average)
        .collect::<Result<Vec<_>>>()?;
    PatternMatrix::from_rows(PatternKind::MonthlyAvgLogHec, patterns.ids().to_vec(), rows)
}

/// Mean 12-month cycle of each zone, from the monthly averages of its
/// member rows. Rows already holding 12 values are used as-is.
pub fn zone_annual_cycle(patterns: &PatternMatrix, z: &ZoneAssignment) -> Result<Vec<Vec<f64>>> {
    if patterns.n_rows() != z.labels.len() {
        return Err(Error::DimensionMismatch {
            expected: patterns.n_rows(),
            found: z.labels.len(),
        });
    }
    let mut sums = vec![vec![0.0; MONTHS_PER_YEAR]; z.k];
    let mut counts = vec![0usize; z.k];
    for (row, &label) in patterns.rows().zip(&z.labels) {
        let avg = monthly_average(row)?;
        for (s, a) in sums[label].iter_mut().zip(&avg) {
            *s += a;
        }
        counts[label] += 1;
    }
    sums.into_iter()
        .zip(counts)
        .enumerate()
        .map(|(zone, (s, c))| {
            if c == 0 {
                Err(Error::EmptyZone(zone))
            } else {
                Ok(s.into_iter().map(|x| x / c as f64).collect())
            }
        })
        .collect()
}

/// Mean log10 HEC over all months of a record.
pub fn mean_log_hec(rec: &BlockGroupRecord) -> Result<f64> {
    let p = log_hec_pattern(rec)?;
    Ok(p.iter().sum::<f64>() / p.len() as f64)
}

fn with_row(e: Error, row: usize) -> Error {
    match e {
        Error::NonpositiveConsumption { month } => Error::DomainViolation {
            row,
            detail: format!("nonpositive consumption in month {month}"),
        },
        other => other,
    }
}
