use serde::{Deserialize, Serialize};

use super::grid::GridSpec;
use super::kernel::{kernel, kernel_matrix, KernelParams};
use crate::error::{Error, Result};
use crate::linalg::Cholesky;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Per-dimension affine map to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let d = x[0].len();
        let n = x.len() as f64;
        let mut mean = vec![0.0; d];
        for p in x {
            for (m, v) in mean.iter_mut().zip(p) {
                *m += v / n;
            }
        }
        let mut scale = vec![0.0; d];
        for p in x {
            for ((s, v), m) in scale.iter_mut().zip(p).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        for s in &mut scale {
            *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
        }
        Self { mean, scale }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            mean: vec![0.0; d],
            scale: vec![1.0; d],
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    /// Standard error of the latent function value (noise excluded).
    pub std_err: f64,
}

/// A Gaussian-process regressor with a constant mean function equal to
/// the training-target mean. Kernel parameters act on standardized
/// inputs and are absolute (not relative to the target variance).
#[derive(Debug, Clone)]
pub struct GpModel {
    pub params: KernelParams,
    pub standardizer: Standardizer,
    pub train_x: Vec<Vec<f64>>,
    pub train_y: Vec<f64>,
    pub y_mean: f64,
    pub log_marginal_likelihood: f64,
    train_z: Vec<Vec<f64>>,
    factor: Cholesky,
    alpha: Vec<f64>,
}

/// Serializable digest of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpSummary {
    pub params: KernelParams,
    pub log_marginal_likelihood: f64,
    pub n: usize,
    pub y_mean: f64,
    pub jitter: f64,
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
}

fn check_inputs(x: &[Vec<f64>], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooFewRows {
            required: 2,
            found: x.len(),
        });
    }
    let d = x[0].len();
    if d == 0 || x.iter().any(|p| p.len() != d) {
        return Err(Error::InvalidParameter("inputs must share a positive dimension".into()));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("inputs must be finite".into()));
    }
    Ok(())
}

struct Evaluation {
    lml: f64,
    factor: Cholesky,
    alpha: Vec<f64>,
}

fn evaluate(z: &[Vec<f64>], centered: &[f64], p: &KernelParams) -> Result<Evaluation> {
    let n = z.len();
    let mut k = kernel_matrix(z, p);
    for i in 0..n {
        k[i * n + i] += p.sigma_n2;
    }
    let factor = Cholesky::factor_with_jitter(&k, n)?;
    let alpha = factor.solve(centered);
    let fit: f64 = centered.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    let lml = -0.5 * fit - 0.5 * factor.log_det() - 0.5 * n as f64 * LN_2PI;
    Ok(Evaluation { lml, factor, alpha })
}

impl GpModel {
    /// Fits at fixed parameters.
    pub fn with_params(x: &[Vec<f64>], y: &[f64], params: KernelParams) -> Result<Self> {
        check_inputs(x, y)?;
        params.validate()?;
        let standardizer = Standardizer::fit(x);
        Self::build(x, y, params, standardizer)
    }

    /// Like [`GpModel::with_params`] but without input standardization, so
    /// parameters refer to the raw input coordinates.
    pub fn with_params_raw(x: &[Vec<f64>], y: &[f64], params: KernelParams) -> Result<Self> {
        check_inputs(x, y)?;
        params.validate()?;
        Self::build(x, y, params, Standardizer::identity(x[0].len()))
    }

    fn build(
        x: &[Vec<f64>],
        y: &[f64],
        params: KernelParams,
        standardizer: Standardizer,
    ) -> Result<Self> {
        let train_z: Vec<Vec<f64>> = x.iter().map(|p| standardizer.apply(p)).collect();
        let y_mean = y.iter().sum::<f64>() / y.len() as f64;
        let centered: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
        let eval = evaluate(&train_z, &centered, &params)?;
        Ok(Self {
            params,
            standardizer,
            train_x: x.to_vec(),
            train_y: y.to_vec(),
            y_mean,
            log_marginal_likelihood: eval.lml,
            train_z,
            factor: eval.factor,
            alpha: eval.alpha,
        })
    }

    /// Maximizes the log marginal likelihood over `grid`, then refines
    /// each nonzero parameter by multiplicative coordinate descent, one
    /// sweep per entry of `grid.refine_steps`.
    pub fn fit(x: &[Vec<f64>], y: &[f64], grid: &GridSpec) -> Result<Self> {
        check_inputs(x, y)?;
        grid.validate()?;
        let standardizer = Standardizer::fit(x);
        let z: Vec<Vec<f64>> = x.iter().map(|p| standardizer.apply(p)).collect();
        let y_mean = y.iter().sum::<f64>() / y.len() as f64;
        let centered: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
        let var = centered.iter().map(|v| v * v).sum::<f64>() / (y.len() - 1) as f64;
        let amp = if var > 0.0 { var } else { 1.0 };

        let score = |p: &KernelParams| -> f64 {
            if p.validate().is_err() {
                return f64::NEG_INFINITY;
            }
            evaluate(&z, &centered, p).map_or(f64::NEG_INFINITY, |e| e.lml)
        };

        let mut best: Option<(KernelParams, f64)> = None;
        for &t0 in &grid.theta0 {
            for &t1 in &grid.theta1 {
                for &t2 in &grid.theta2 {
                    for &t3 in &grid.theta3 {
                        for &s in &grid.sigma_n2 {
                            let p = KernelParams {
                                theta0: t0 * amp,
                                theta1: t1,
                                theta2: t2 * amp,
                                theta3: t3 * amp,
                                sigma_n2: s * amp,
                            };
                            let v = score(&p);
                            if best.as_ref().is_none_or(|(_, b)| v > *b) {
                                best = Some((p, v));
                            }
                        }
                    }
                }
            }
        }
        let (mut params, mut current) = best.expect("grid is nonempty");
        if !current.is_finite() {
            return Err(Error::SingularKernel {
                jitter: crate::linalg::JITTER_MAX,
            });
        }

        for &step in &grid.refine_steps {
            for i in 0..5 {
                if params.get(i) == 0.0 {
                    continue;
                }
                for factor in [step, 1.0 / step] {
                    let mut moved = false;
                    for _ in 0..40 {
                        let mut trial = params;
                        trial.set(i, params.get(i) * factor);
                        let v = score(&trial);
                        if v > current {
                            params = trial;
                            current = v;
                            moved = true;
                        } else {
                            break;
                        }
                    }
                    if moved {
                        break;
                    }
                }
            }
        }

        Self::build(x, y, params, standardizer)
    }

    pub fn n(&self) -> usize {
        self.train_y.len()
    }

    pub fn jitter(&self) -> f64 {
        self.factor.jitter()
    }

    /// Lower-triangular factor of `K + sigma_n2 I` (+ jitter), row-major.
    pub fn kernel_factor(&self) -> &[f64] {
        self.factor.lower()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn summary(&self) -> GpSummary {
        GpSummary {
            params: self.params,
            log_marginal_likelihood: self.log_marginal_likelihood,
            n: self.n(),
            y_mean: self.y_mean,
            jitter: self.jitter(),
            input_mean: self.standardizer.mean.clone(),
            input_scale: self.standardizer.scale.clone(),
        }
    }

    pub fn predict_one(&self, x: &[f64]) -> Prediction {
        let zs = self.standardizer.apply(x);
        let kstar: Vec<f64> = self
            .train_z
            .iter()
            .map(|z| kernel(z, &zs, &self.params))
            .collect();
        let mean = self.y_mean + kstar.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>();
        let v = self.factor.solve_lower(&kstar);
        let prior = kernel(&zs, &zs, &self.params);
        let var = (prior - v.iter().map(|x| x * x).sum::<f64>()).max(0.0);
        Prediction {
            mean,
            std_err: var.sqrt(),
        }
    }

    pub fn predict(&self, xs: &[Vec<f64>]) -> Vec<Prediction> {
        xs.iter().map(|x| self.predict_one(x)).collect()
    }

    /// Gradient of the predictive mean with respect to the query point,
    /// in original input units.
    pub fn mean_gradient(&self, x: &[f64]) -> Vec<f64> {
        let zs = self.standardizer.apply(x);
        let p = &self.params;
        let mut g = vec![0.0; zs.len()];
        for (z, a) in self.train_z.iter().zip(&self.alpha) {
            let d2: f64 = z.iter().zip(&zs).map(|(u, v)| (u - v) * (u - v)).sum();
            let se = p.theta0 * (-0.5 * p.theta1 * d2).exp();
            for ((gi, zi), qi) in g.iter_mut().zip(z).zip(&zs) {
                *gi += a * (-p.theta1 * (qi - zi) * se + p.theta3 * zi);
            }
        }
        g.iter()
            .zip(&self.standardizer.scale)
            .map(|(gi, s)| gi / s)
            .collect()
    }
}
