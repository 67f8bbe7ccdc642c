use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::clustering::restart_rng;
use crate::error::{Error, Result};

/// Noise standard deviation below which an expert counts as collapsed.
pub const COLLAPSE_SD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Expert {
    pub slope: f64,
    pub intercept: f64,
    pub noise_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureRegressionModel {
    /// Sorted by slope.
    pub experts: Vec<Expert>,
    /// Input-independent mixing weights.
    pub weights: Vec<f64>,
    /// Posterior responsibility of each expert for each point (`n x k`).
    pub responsibilities: Vec<Vec<f64>>,
    pub log_likelihood: f64,
    /// Log-likelihood after each E-step of the winning run.
    pub ll_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub restart: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    pub k: usize,
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop when the log-likelihood gain falls below `tol * (1 + |ll|)`.
    pub tol: f64,
}

impl EmConfig {
    pub fn new(k: usize, restarts: usize, seed: u64) -> Self {
        Self {
            k,
            restarts,
            seed,
            max_iter: 1000,
            tol: 1e-10,
        }
    }
}

/// EM for a `k`-component mixture of linear regressions with constant
/// gates. Returns the best run by log-likelihood.
pub fn mixture_regression_em(x: &[f64], y: &[f64], k: usize, restarts: usize, seed: u64) -> Result<MixtureRegressionModel> {
    mixture_regression(x, y, &EmConfig::new(k, restarts, seed))
}

pub fn mixture_regression(x: &[f64], y: &[f64], cfg: &EmConfig) -> Result<MixtureRegressionModel> {
    mixture_regression_runs(x, y, cfg)?
        .into_iter()
        .flatten()
        .reduce(|best, run| if run.log_likelihood > best.log_likelihood { run } else { best })
        .ok_or(Error::Degenerate)
}

/// Every restart; `None` marks a run in which an expert collapsed.
pub fn mixture_regression_runs(
    x: &[f64],
    y: &[f64],
    cfg: &EmConfig,
) -> Result<Vec<Option<MixtureRegressionModel>>> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if cfg.k == 0 || cfg.restarts == 0 {
        return Err(Error::InvalidParameter("k and restarts must be positive".into()));
    }
    let n = x.len();
    if n < 3 * cfg.k {
        return Err(Error::TooFewRows {
            required: 3 * cfg.k,
            found: n,
        });
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    if x.iter().all(|v| (v - mx).abs() == 0.0) {
        return Err(Error::DegenerateX);
    }
    Ok((0..cfg.restarts).map(|r| run_em(x, y, cfg, r)).collect())
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

fn log_normal(y: f64, mean: f64, sd: f64) -> f64 {
    let u = (y - mean) / sd;
    -0.5 * u * u - sd.ln() - LN_SQRT_2PI
}

/// Returns the log-likelihood and fills `resp`.
fn e_step(x: &[f64], y: &[f64], experts: &[Expert], weights: &[f64], resp: &mut [Vec<f64>]) -> f64 {
    let mut ll = 0.0;
    for ((xi, yi), r) in x.iter().zip(y).zip(resp.iter_mut()) {
        for ((rj, e), w) in r.iter_mut().zip(experts).zip(weights) {
            *rj = w.ln() + log_normal(*yi, e.intercept + e.slope * xi, e.noise_sd);
        }
        let m = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = r.iter().map(|v| (v - m).exp()).sum();
        let lse = m + s.ln();
        for rj in r.iter_mut() {
            *rj = (*rj - lse).exp();
        }
        ll += lse;
    }
    ll
}

/// Weighted least squares per expert. `None` if an expert collapses.
fn m_step(x: &[f64], y: &[f64], resp: &[Vec<f64>], k: usize) -> Option<(Vec<Expert>, Vec<f64>)> {
    let n = x.len() as f64;
    let mut experts = Vec::with_capacity(k);
    let mut weights = Vec::with_capacity(k);
    for j in 0..k {
        let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
        for ((xi, yi), r) in x.iter().zip(y).zip(resp) {
            sw += r[j];
            sx += r[j] * xi;
            sy += r[j] * yi;
        }
        if !(sw > 1e-12) {
            return None;
        }
        let (mx, my) = (sx / sw, sy / sw);
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for ((xi, yi), r) in x.iter().zip(y).zip(resp) {
            sxx += r[j] * (xi - mx) * (xi - mx);
            sxy += r[j] * (xi - mx) * (yi - my);
        }
        if !(sxx > 1e-300) {
            return None;
        }
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let sse: f64 = x
            .iter()
            .zip(y)
            .zip(resp)
            .map(|((xi, yi), r)| r[j] * (yi - intercept - slope * xi).powi(2))
            .sum();
        let noise_sd = (sse / sw).sqrt();
        if !(noise_sd >= COLLAPSE_SD) {
            return None;
        }
        experts.push(Expert {
            slope,
            intercept,
            noise_sd,
        });
        weights.push(sw / n);
    }
    Some((experts, weights))
}

fn run_em(x: &[f64], y: &[f64], cfg: &EmConfig, restart: usize) -> Option<MixtureRegressionModel> {
    let n = x.len();
    let k = cfg.k;
    let mut rng = restart_rng(cfg.seed, restart);

    // Start from lines through random pairs of points, with the overall
    // spread of y as every expert's noise.
    let my = y.iter().sum::<f64>() / n as f64;
    let sd_y = (y.iter().map(|v| (v - my).powi(2)).sum::<f64>() / n as f64).sqrt();
    let mut experts = Vec::with_capacity(k);
    for _ in 0..k {
        let pick = index::sample(&mut rng, n, 2).into_vec();
        let (a, b) = (pick[0], pick[1]);
        let slope = if x[a] != x[b] {
            (y[b] - y[a]) / (x[b] - x[a])
        } else {
            0.0
        };
        experts.push(Expert {
            slope,
            intercept: y[a] - slope * x[a],
            noise_sd: sd_y.max(COLLAPSE_SD),
        });
    }
    let mut weights = vec![1.0 / k as f64; k];
    let mut resp = vec![vec![0.0; k]; n];

    let mut ll = e_step(x, y, &experts, &weights, &mut resp);
    let mut ll_trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        let (e, w) = m_step(x, y, &resp, k)?;
        experts = e;
        weights = w;
        iterations += 1;
        let next = e_step(x, y, &experts, &weights, &mut resp);
        ll_trace.push(next);
        let gain = next - ll;
        ll = next;
        if gain.abs() < cfg.tol * (1.0 + ll.abs()) {
            converged = true;
            break;
        }
    }

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| experts[a].slope.total_cmp(&experts[b].slope));
    Some(MixtureRegressionModel {
        experts: order.iter().map(|&j| experts[j]).collect(),
        weights: order.iter().map(|&j| weights[j]).collect(),
        responsibilities: resp
            .iter()
            .map(|r| order.iter().map(|&j| r[j]).collect())
            .collect(),
        log_likelihood: ll,
        ll_trace,
        iterations,
        converged,
        restart,
    })
}
