//! Synthetic block-group datasets with planted zones.
//!
//! Each zone is a disk of block groups. A block group's mean log10 HEC is
//! `slope * log10(PHI) + intercept + noise + f(x)`, where `f` is a draw of a
//! zero-mean Gaussian random field over the zone's positions. Monthly
//! values add the zone's seasonal offset and independent observation noise.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::clustering::restart_rng;
use crate::error::{Error, Result};
use crate::geostats::GeoPoint;
use crate::gp::{kernel_matrix, KernelParams};
use crate::ingest::{write_zone_labels, BlockGroupRecord, Dataset};
use crate::linalg::Cholesky;
use crate::transforms::MONTHS_PER_YEAR;

/// Miles per degree of latitude on the haversine sphere.
pub const MILES_PER_DEGREE: f64 = crate::geostats::EARTH_RADIUS_MILES * std::f64::consts::PI / 180.0;

/// Persons-per-household range used to derive PCI from PHI.
const PPH_RANGE: (f64, f64) = (1.5, 4.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncomeParams {
    pub slope: f64,
    pub intercept: f64,
    /// Standard deviation of the per-block-group deviation from the line.
    pub noise_sd: f64,
    pub log_phi_mean: f64,
    pub log_phi_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_per_zone: Vec<usize>,
    pub zone_centers: Vec<GeoPoint>,
    pub zone_radius_miles: f64,
    /// Relative monthly shape per zone, 12 strictly positive values. Only
    /// the shape matters: each template is rescaled to unit geometric mean.
    pub seasonal_templates: Vec<Vec<f64>>,
    pub income_params: Vec<IncomeParams>,
    /// Covariance of the spatial field over positions in miles; `None`
    /// disables the field.
    pub spatial_kernel: Option<KernelParams>,
    /// Standard deviation of independent monthly log10 noise.
    pub obs_noise_sd: f64,
    pub years: usize,
    pub seed: u64,
    #[serde(default = "default_households")]
    pub households_range: (u32, u32),
}

fn default_households() -> (u32, u32) {
    (200, 1200)
}

fn cosine_template(amplitude: f64, peak_month: f64, cycles: f64) -> Vec<f64> {
    (0..MONTHS_PER_YEAR)
        .map(|m| {
            let phase = 2.0 * std::f64::consts::PI * cycles * (m as f64 - peak_month) / 12.0;
            1.0 + amplitude * phase.cos()
        })
        .collect()
}

impl Default for SynthConfig {
    /// Three zones of 400 block groups over six years around Los Angeles:
    /// a coastal winter-peak zone, an inland summer-peak zone and a
    /// twice-yearly-peak zone, centers about 30 miles apart.
    fn default() -> Self {
        let income = |slope, intercept| IncomeParams {
            slope,
            intercept,
            noise_sd: 0.05,
            log_phi_mean: 4.8,
            log_phi_sd: 0.25,
        };
        Self {
            n_per_zone: vec![400; 3],
            zone_centers: vec![
                GeoPoint::new(34.00, -118.45),
                GeoPoint::new(34.00, -117.93),
                GeoPoint::new(34.39, -118.19),
            ],
            zone_radius_miles: 8.0,
            seasonal_templates: vec![
                cosine_template(0.25, 0.0, 1.0),
                cosine_template(0.4, 7.0, 1.0),
                cosine_template(0.25, 0.5, 2.0),
            ],
            income_params: vec![income(0.46, 0.36), income(0.60, -0.27), income(0.61, -0.22)],
            spatial_kernel: Some(KernelParams::squared_exponential(0.0025, 0.04)),
            obs_noise_sd: 0.02,
            years: 6,
            seed: 0,
            households_range: default_households(),
        }
    }
}

impl SynthConfig {
    pub fn k(&self) -> usize {
        self.n_per_zone.len()
    }

    pub fn months(&self) -> usize {
        MONTHS_PER_YEAR * self.years
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 {
            return Err(Error::Config("at least one zone is required".into()));
        }
        for (name, len) in [
            ("zone_centers", self.zone_centers.len()),
            ("seasonal_templates", self.seasonal_templates.len()),
            ("income_params", self.income_params.len()),
        ] {
            if len != k {
                return Err(Error::Config(format!(
                    "{name} has {len} entries but n_per_zone has {k}"
                )));
            }
        }
        if self.n_per_zone.contains(&0) {
            return Err(Error::Config("every zone needs at least one block group".into()));
        }
        if let Some(c) = self.zone_centers.iter().find(|c| !c.is_valid()) {
            return Err(Error::Config(format!("invalid zone center {c:?}")));
        }
        if !(self.zone_radius_miles > 0.0) || !self.zone_radius_miles.is_finite() {
            return Err(Error::Config("zone_radius_miles must be positive".into()));
        }
        for (z, t) in self.seasonal_templates.iter().enumerate() {
            if t.len() != MONTHS_PER_YEAR {
                return Err(Error::Config(format!(
                    "template {z} has {} values, expected {MONTHS_PER_YEAR}",
                    t.len()
                )));
            }
            if t.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::Config(format!("template {z} must be strictly positive")));
            }
        }
        for (z, p) in self.income_params.iter().enumerate() {
            let finite = [p.slope, p.intercept, p.noise_sd, p.log_phi_mean, p.log_phi_sd]
                .iter()
                .all(|v| v.is_finite());
            if !finite || p.noise_sd < 0.0 || p.log_phi_sd < 0.0 {
                return Err(Error::Config(format!("invalid income parameters for zone {z}")));
            }
        }
        if let Some(kp) = &self.spatial_kernel {
            kp.validate().map_err(|e| Error::Config(format!("spatial_kernel: {e}")))?;
        }
        if !(self.obs_noise_sd >= 0.0) || !self.obs_noise_sd.is_finite() {
            return Err(Error::Config("obs_noise_sd must be nonnegative".into()));
        }
        if self.years == 0 {
            return Err(Error::Config("years must be positive".into()));
        }
        let (lo, hi) = self.households_range;
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!("invalid households_range ({lo}, {hi})")));
        }
        Ok(())
    }

    /// Planted monthly log10 offsets of zone `z`, averaging to zero.
    pub fn seasonal_offsets(&self, z: usize) -> Vec<f64> {
        let logs: Vec<f64> = self.seasonal_templates[z].iter().map(|v| v.log10()).collect();
        let mean = logs.iter().sum::<f64>() / logs.len() as f64;
        logs.iter().map(|v| v - mean).collect()
    }
}

/// Planted quantities behind a generated dataset, indexed like its records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub labels: Vec<usize>,
    pub log_phi: Vec<f64>,
    /// Spatial field value per block group (zero when disabled).
    pub field: Vec<f64>,
    /// Mean log10 HEC before seasonal offsets and observation noise.
    pub base: Vec<f64>,
}

pub fn generate(cfg: &SynthConfig) -> Result<Dataset> {
    Ok(generate_with_truth(cfg)?.0)
}

/// Zone `z` draws from its own RNG stream, so a zone's block groups do not
/// depend on the sizes of the other zones.
pub fn generate_with_truth(cfg: &SynthConfig) -> Result<(Dataset, SynthTruth)> {
    cfg.validate()?;
    let months = cfg.months();
    let mut records = Vec::with_capacity(cfg.n_per_zone.iter().sum());
    let mut truth = SynthTruth {
        labels: Vec::new(),
        log_phi: Vec::new(),
        field: Vec::new(),
        base: Vec::new(),
    };
    let gauss = StandardNormal;
    for z in 0..cfg.k() {
        let mut rng = restart_rng(cfg.seed, z);
        let n = cfg.n_per_zone[z];
        let center = cfg.zone_centers[z];
        let income = cfg.income_params[z];
        let offsets = cfg.seasonal_offsets(z);

        let positions: Vec<GeoPoint> = (0..n)
            .map(|_| point_in_disk(&mut rng, center, cfg.zone_radius_miles))
            .collect();
        let field_seed: u64 = rng.random();
        let field = match &cfg.spatial_kernel {
            Some(kp) => sample_gprf(&positions, kp, field_seed)?,
            None => vec![0.0; n],
        };

        for (i, (pos, f)) in positions.into_iter().zip(field).enumerate() {
            let z0: f64 = gauss.sample(&mut rng);
            let z1: f64 = gauss.sample(&mut rng);
            let log_phi = income.log_phi_mean + income.log_phi_sd * z0;
            let base = income.slope * log_phi + income.intercept + income.noise_sd * z1 + f;
            let hh: u32 = rng.random_range(cfg.households_range.0..=cfg.households_range.1);
            let pph: f64 = rng.random_range(PPH_RANGE.0..PPH_RANGE.1);
            let phi = 10f64.powf(log_phi);
            let ec = (0..months)
                .map(|t| {
                    let eps: f64 = gauss.sample(&mut rng);
                    let v = base + offsets[t % MONTHS_PER_YEAR] + cfg.obs_noise_sd * eps;
                    f64::from(hh) * 10f64.powf(v)
                })
                .collect();
            records.push(BlockGroupRecord {
                id: format!("z{z}-{i:05}"),
                lat: pos.lat,
                lon: pos.lon,
                ec,
                households: vec![hh; months],
                phi,
                pci: phi / pph,
                population: (f64::from(hh) * pph).round() as u32,
            });
            truth.labels.push(z);
            truth.log_phi.push(log_phi);
            truth.field.push(f);
            truth.base.push(base);
        }
    }
    let ds = Dataset::new(records, Some(truth.labels.clone()))?;
    Ok((ds, truth))
}

/// Uniform position in the disk of radius `radius` miles around `center`,
/// using a local equirectangular approximation.
fn point_in_disk(rng: &mut impl Rng, center: GeoPoint, radius: f64) -> GeoPoint {
    let r = radius * rng.random::<f64>().sqrt();
    let angle = 2.0 * std::f64::consts::PI * rng.random::<f64>();
    let (dx, dy) = (r * angle.cos(), r * angle.sin());
    GeoPoint::new(
        center.lat + dy / MILES_PER_DEGREE,
        center.lon + dx / (MILES_PER_DEGREE * center.lat.to_radians().cos()),
    )
}

/// Planar coordinates in miles relative to the points' mean position.
pub fn local_miles(points: &[GeoPoint]) -> Vec<Vec<f64>> {
    let n = points.len().max(1) as f64;
    let lat0 = points.iter().map(|p| p.lat).sum::<f64>() / n;
    let lon0 = points.iter().map(|p| p.lon).sum::<f64>() / n;
    let kx = MILES_PER_DEGREE * lat0.to_radians().cos();
    points
        .iter()
        .map(|p| vec![(p.lon - lon0) * kx, (p.lat - lat0) * MILES_PER_DEGREE])
        .collect()
}

/// One joint draw of a zero-mean Gaussian field at `points` with
/// covariance `K + sigma_n2 I`, where `K` is evaluated on
/// [`local_miles`] coordinates.
pub fn sample_gprf(points: &[GeoPoint], p: &KernelParams, seed: u64) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::TooFewRows {
            required: 1,
            found: 0,
        });
    }
    p.validate()?;
    let n = points.len();
    let mut k = kernel_matrix(&local_miles(points), p);
    for i in 0..n {
        k[i * n + i] += p.sigma_n2;
    }
    let factor = Cholesky::factor_semidefinite(&k, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    Ok(factor.mul_lower(&z))
}

/// Ground-truth labels as `id,zone`.
pub fn write_truth_labels(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_truth_labels_to(ds, file)
}

pub fn write_truth_labels_to<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let labels = ds
        .labels
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("dataset has no ground-truth labels".into()))?;
    write_zone_labels(ds, labels, writer)
}
