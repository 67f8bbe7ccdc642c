//! Great-circle distance, covariance between block-group series, and
//! per-zone distance/covariance diagnostics for the random-field view of
//! log consumption.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::clustering::{restart_rng, ZoneAssignment};
use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::transforms::{PatternKind, PatternMatrix};

pub const EARTH_RADIUS_MILES: f64 = 3958.8;

/// Default cap on sampled pairs per zone.
pub const DEFAULT_MAX_PAIRS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lon)
    }
}

pub fn haversine_miles(p: GeoPoint, q: GeoPoint) -> f64 {
    let (phi1, phi2) = (p.lat.to_radians(), q.lat.to_radians());
    let dphi = (q.lat - p.lat).to_radians();
    let dlambda = (q.lon - p.lon).to_radians();
    let s1 = (0.5 * dphi).sin();
    let s2 = (0.5 * dlambda).sin();
    let a = (s1 * s1 + phi1.cos() * phi2.cos() * s2 * s2).clamp(0.0, 1.0);
    2.0 * EARTH_RADIUS_MILES * a.sqrt().atan2((1.0 - a).sqrt())
}

/// Sample covariance (denominator `n - 1`).
pub fn empirical_cov(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let n = u.len();
    if n < 2 {
        return Err(Error::TooFewRows {
            required: 2,
            found: n,
        });
    }
    let mu = u.iter().sum::<f64>() / n as f64;
    let mv = v.iter().sum::<f64>() / n as f64;
    let s: f64 = u.iter().zip(v).map(|(a, b)| (a - mu) * (b - mv)).sum();
    Ok(s / (n - 1) as f64)
}

/// Streaming central moments up to order four. Two accumulators can be
/// merged, so batches may be summarized independently.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MomentAccumulator {
    n: f64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl MomentAccumulator {
    pub fn push(&mut self, x: f64) {
        let mut one = MomentAccumulator {
            n: 1.0,
            mean: x,
            ..Default::default()
        };
        std::mem::swap(self, &mut one);
        *self = one.merge(self);
    }

    pub fn merge(&self, other: &Self) -> Self {
        if self.n == 0.0 {
            return *other;
        }
        if other.n == 0.0 {
            return *self;
        }
        let (na, nb) = (self.n, other.n);
        let n = na + nb;
        let d = other.mean - self.mean;
        let d2 = d * d;
        let mean = self.mean + d * nb / n;
        let m2 = self.m2 + other.m2 + d2 * na * nb / n;
        let m3 = self.m3
            + other.m3
            + d * d2 * na * nb * (na - nb) / (n * n)
            + 3.0 * d * (na * other.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + other.m4
            + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * d * (na * other.m3 - nb * self.m3) / n;
        Self { n, mean, m2, m3, m4 }
    }

    pub fn count(&self) -> usize {
        self.n as usize
    }

    /// `None` with fewer than three samples or zero spread, where skewness
    /// and kurtosis are undefined.
    pub fn moments(&self) -> Option<Moments> {
        if self.n < 3.0 || !(self.m2 > 1e-300) {
            return None;
        }
        let var_pop = self.m2 / self.n;
        Some(Moments {
            mean: self.mean,
            sd: (self.m2 / (self.n - 1.0)).sqrt(),
            skewness: (self.m3 / self.n) / var_pop.powf(1.5),
            excess_kurtosis: (self.m4 / self.n) / (var_pop * var_pop) - 3.0,
        })
    }
}

impl FromIterator<f64> for MomentAccumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::default();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    /// Sample standard deviation.
    pub sd: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

impl Moments {
    /// `n/6 * (S^2 + K^2/4)`; approximately chi-squared with 2 degrees of
    /// freedom for Gaussian samples.
    pub fn jarque_bera(&self, n: usize) -> f64 {
        n as f64 / 6.0 * (self.skewness.powi(2) + 0.25 * self.excess_kurtosis.powi(2))
    }
}

/// 5% critical value of chi-squared with 2 degrees of freedom.
pub const JB_CRITICAL_5PCT: f64 = 5.991;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MarginalSummary {
    Summary {
        count: usize,
        moments: Moments,
        jarque_bera: f64,
    },
    InsufficientSamples {
        count: usize,
    },
}

impl MarginalSummary {
    pub fn of(samples: &[f64]) -> Self {
        let acc: MomentAccumulator = samples.iter().copied().collect();
        match acc.moments() {
            Some(moments) => MarginalSummary::Summary {
                count: samples.len(),
                moments,
                jarque_bera: moments.jarque_bera(samples.len()),
            },
            None => MarginalSummary::InsufficientSamples {
                count: samples.len(),
            },
        }
    }

    pub fn jarque_bera(&self) -> Option<f64> {
        match self {
            MarginalSummary::Summary { jarque_bera, .. } => Some(*jarque_bera),
            MarginalSummary::InsufficientSamples { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneDiagnostics {
    pub zone: usize,
    pub members: usize,
    /// Pairwise great-circle distances, miles.
    pub dist_samples: Vec<f64>,
    /// Pairwise covariances of the members' log-HEC series, same pairs.
    pub cov_samples: Vec<f64>,
    pub distance: MarginalSummary,
    pub covariance: MarginalSummary,
    /// Sample covariance matrix of the (distance, covariance) pairs.
    pub joint_cov: Option<[[f64; 2]; 2]>,
}

/// Samples up to `max_pairs` distinct unordered member pairs per zone
/// (all pairs when there are fewer) and summarizes their distances and
/// series covariances.
pub fn zone_diagnostics(
    ds: &Dataset,
    patterns: &PatternMatrix,
    z: &ZoneAssignment,
    max_pairs: usize,
    seed: u64,
) -> Result<Vec<ZoneDiagnostics>> {
    if patterns.kind() != PatternKind::RawLogHec {
        return Err(Error::InvalidParameter(
            "diagnostics need raw log10 HEC patterns".into(),
        ));
    }
    if patterns.n_rows() != ds.len() || z.labels.len() != ds.len() {
        return Err(Error::DimensionMismatch {
            expected: ds.len(),
            found: patterns.n_rows().min(z.labels.len()),
        });
    }
    if let Some((id, _)) = ds
        .records
        .iter()
        .zip(patterns.ids())
        .find(|(r, id)| &r.id != *id)
    {
        return Err(Error::UnknownId(id.id.clone()));
    }

    z.members()
        .into_iter()
        .enumerate()
        .map(|(zone, members)| {
            match members.len() {
                0 => return Err(Error::EmptyZone(zone)),
                1 => {
                    return Err(Error::ZoneTooSmall {
                        zone,
                        members: 1,
                        required: 2,
                    })
                }
                _ => {}
            }
            let pairs = sample_pairs(members.len(), max_pairs, seed, zone);
            let mut dist_samples = Vec::with_capacity(pairs.len());
            let mut cov_samples = Vec::with_capacity(pairs.len());
            for (a, b) in pairs {
                let (i, j) = (members[a], members[b]);
                dist_samples.push(haversine_miles(
                    ds.records[i].position(),
                    ds.records[j].position(),
                ));
                cov_samples.push(empirical_cov(patterns.row(i), patterns.row(j))?);
            }
            let joint_cov = (dist_samples.len() >= 2).then(|| {
                let dd = empirical_cov(&dist_samples, &dist_samples).expect("len >= 2");
                let dc = empirical_cov(&dist_samples, &cov_samples).expect("len >= 2");
                let cc = empirical_cov(&cov_samples, &cov_samples).expect("len >= 2");
                [[dd, dc], [dc, cc]]
            });
            Ok(ZoneDiagnostics {
                zone,
                members: members.len(),
                distance: MarginalSummary::of(&dist_samples),
                covariance: MarginalSummary::of(&cov_samples),
                dist_samples,
                cov_samples,
                joint_cov,
            })
        })
        .collect()
}

/// Distinct pairs `(a, b)` with `a < b < m`, in lexicographic order.
fn sample_pairs(m: usize, max_pairs: usize, seed: u64, zone: usize) -> Vec<(usize, usize)> {
    let total = m * (m - 1) / 2;
    // row a starts at linear index a*(2m - a - 1)/2
    let start = |a: usize| a * (2 * m - a - 1) / 2;
    let unrank = |p: usize| -> (usize, usize) {
        let (mut lo, mut hi) = (0, m - 1);
        while lo + 1 < hi {
            let mid = (lo + hi) / 2;
            if start(mid) <= p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo, lo + 1 + (p - start(lo)))
    };
    if total <= max_pairs {
        return (0..total).map(unrank).collect();
    }
    let mut rng = restart_rng(seed, zone);
    let mut picks = index::sample(&mut rng, total, max_pairs).into_vec();
    picks.sort_unstable();
    picks.into_iter().map(unrank).collect()
}
