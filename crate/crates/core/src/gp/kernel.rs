use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Squared-exponential plus bias plus linear covariance, with additive
/// observation noise:
///
/// `k(x, x') = theta0 * exp(-theta1/2 * |x - x'|^2) + theta2 + theta3 * <x, x'>`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// Signal variance of the squared-exponential term.
    pub theta0: f64,
    /// Inverse squared length-scale.
    pub theta1: f64,
    /// Constant (bias) variance.
    pub theta2: f64,
    /// Linear-term coefficient.
    pub theta3: f64,
    /// Observation noise variance.
    pub sigma_n2: f64,
}

impl KernelParams {
    pub fn squared_exponential(theta0: f64, theta1: f64) -> Self {
        Self {
            theta0,
            theta1,
            theta2: 0.0,
            theta3: 0.0,
            sigma_n2: 0.0,
        }
    }

    pub fn with_noise(self, sigma_n2: f64) -> Self {
        Self { sigma_n2, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.theta0, self.theta1, self.theta2, self.theta3, self.sigma_n2];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kernel parameters must be finite and nonnegative: {self:?}"
            )));
        }
        if self.theta0 == 0.0 && self.theta2 == 0.0 && self.theta3 == 0.0 {
            return Err(Error::InvalidParameter(
                "one of theta0, theta2, theta3 must be positive".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn get(&self, i: usize) -> f64 {
        [self.theta0, self.theta1, self.theta2, self.theta3, self.sigma_n2][i]
    }

    pub(crate) fn set(&mut self, i: usize, v: f64) {
        match i {
            0 => self.theta0 = v,
            1 => self.theta1 = v,
            2 => self.theta2 = v,
            3 => self.theta3 = v,
            _ => self.sigma_n2 = v,
        }
    }
}

pub fn kernel(x: &[f64], x2: &[f64], p: &KernelParams) -> f64 {
    let mut d2 = 0.0;
    let mut inner = 0.0;
    for (a, b) in x.iter().zip(x2) {
        d2 += (a - b) * (a - b);
        inner += a * b;
    }
    p.theta0 * (-0.5 * p.theta1 * d2).exp() + p.theta2 + p.theta3 * inner
}

/// Row-major `K(points, points)` without the noise term.
pub fn kernel_matrix(points: &[Vec<f64>], p: &KernelParams) -> Vec<f64> {
    let n = points.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = kernel(&points[i], &points[j], p);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}
