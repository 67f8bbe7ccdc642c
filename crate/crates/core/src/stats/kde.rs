use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

fn check_weights(values: &[f64], weights: &[f64]) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: values.len(),
            found: weights.len(),
        });
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidParameter("weights must be finite and nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidParameter("weights must have a positive sum".into()));
    }
    Ok(total)
}

/// Weighted quantile with the midpoint empirical CDF, linearly
/// interpolated.
fn weighted_quantile(values: &[f64], weights: &[f64], q: f64) -> f64 {
    let mut idx: Vec<usize> = (0..values.len()).filter(|&i| weights[i] > 0.0).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = idx.iter().map(|&i| weights[i]).sum();
    let mut cum = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for &i in &idx {
        let p = (cum + 0.5 * weights[i]) / total;
        cum += weights[i];
        if p >= q {
            return match prev {
                None => values[i],
                Some((pp, pv)) => pv + (values[i] - pv) * (q - pp) / (p - pp),
            };
        }
        prev = Some((p, values[i]));
    }
    values[*idx.last().expect("positive total weight")]
}

/// Silverman's rule of thumb on a weighted sample:
/// `0.9 * min(sd, IQR / 1.34) * n_eff^(-1/5)`, with Kish's effective sample
/// size `n_eff = (sum w)^2 / sum w^2`.
pub fn silverman_bandwidth(values: &[f64], weights: &[f64]) -> Result<f64> {
    let total = check_weights(values, weights)?;
    let mean = values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total;
    let var = values
        .iter()
        .zip(weights)
        .map(|(v, w)| w * (v - mean).powi(2))
        .sum::<f64>()
        / total;
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Err(Error::DegenerateSample("all values are equal".into()));
    }
    let n_eff = total * total / weights.iter().map(|w| w * w).sum::<f64>();
    let iqr = weighted_quantile(values, weights, 0.75) - weighted_quantile(values, weights, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * spread * n_eff.powf(-0.2))
}

/// `points` evenly spaced values from `min - 4h` to `max + 4h`.
pub fn density_grid(values: &[f64], bandwidth: f64, points: usize) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min) - 4.0 * bandwidth;
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 4.0 * bandwidth;
    if points < 2 {
        return vec![0.5 * (lo + hi)];
    }
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

/// Weighted Gaussian-kernel density estimate evaluated at `grid`.
pub fn kde(
    values: &[f64],
    weights: &[f64],
    bandwidth: Option<f64>,
    grid: &[f64],
) -> Result<DensityCurve> {
    let total = check_weights(values, weights)?;
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(Error::InvalidParameter(format!("bandwidth {h} must be positive"))),
        None => silverman_bandwidth(values, weights)?,
    };
    let density = grid
        .iter()
        .map(|&g| {
            let s: f64 = values
                .iter()
                .zip(weights)
                .map(|(v, w)| {
                    let u = (g - v) / h;
                    w * (-0.5 * u * u).exp()
                })
                .sum();
            s * INV_SQRT_2PI / (h * total)
        })
        .collect();
    Ok(DensityCurve {
        bandwidth: h,
        grid: grid.to_vec(),
        density,
    })
}

/// Per-group weighted densities on a shared bandwidth, and their mixture
/// weighted by each group's share of the total weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMixture {
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub fractions: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    pub total: Vec<f64>,
}

/// `groups` holds `(values, weights)` per cluster. Without an explicit
/// bandwidth the pooled sample's Silverman bandwidth is shared.
pub fn kde_mixture(
    groups: &[(Vec<f64>, Vec<f64>)],
    bandwidth: Option<f64>,
    grid: &[f64],
) -> Result<DensityMixture> {
    let pooled_v: Vec<f64> = groups.iter().flat_map(|g| g.0.iter().copied()).collect();
    let pooled_w: Vec<f64> = groups.iter().flat_map(|g| g.1.iter().copied()).collect();
    let grand = check_weights(&pooled_v, &pooled_w)?;
    let h = match bandwidth {
        Some(h) => h,
        None => silverman_bandwidth(&pooled_v, &pooled_w)?,
    };
    let mut fractions = Vec::with_capacity(groups.len());
    let mut components = Vec::with_capacity(groups.len());
    let mut total = vec![0.0; grid.len()];
    for (v, w) in groups {
        let curve = kde(v, w, Some(h), grid)?;
        let f = w.iter().sum::<f64>() / grand;
        for (t, d) in total.iter_mut().zip(&curve.density) {
            *t += f * d;
        }
        fractions.push(f);
        components.push(curve.density);
    }
    Ok(DensityMixture {
        bandwidth: h,
        grid: grid.to_vec(),
        fractions,
        components,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
        x.windows(2)
            .zip(y.windows(2))
            .map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1]))
            .sum()
    }

    #[test]
    fn single_point_is_a_gaussian() {
        let grid = [-1.0, 0.0, 0.5, 2.0];
        let c = kde(&[0.5], &[3.0], Some(0.25), &grid).unwrap();
        for (g, d) in grid.iter().zip(&c.density) {
            let u = (g - 0.5) / 0.25;
            let want = (-0.5 * u * u).exp() * INV_SQRT_2PI / 0.25;
            assert!((d - want).abs() < 1e-14);
        }
    }

    #[test]
    fn integrates_to_one() {
        let values = [1.0, 1.3, 2.2, 2.9, 3.1, 4.0, 4.4];
        let weights = [1.0, 2.0, 1.0, 0.5, 3.0, 1.0, 1.0];
        let h = silverman_bandwidth(&values, &weights).unwrap();
        let grid = density_grid(&values, h, 2001);
        let c = kde(&values, &weights, None, &grid).unwrap();
        assert_eq!(c.bandwidth, h);
        assert!((trapezoid(&grid, &c.density) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn standard_normal_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let g = Normal::new(0.0, 1.0).unwrap();
        let values: Vec<f64> = (0..10_000).map(|_| g.sample(&mut rng)).collect();
        let weights = vec![1.0; values.len()];
        let grid: Vec<f64> = (0..81).map(|i| -4.0 + 0.1 * i as f64).collect();
        let c = kde(&values, &weights, None, &grid).unwrap();
        let max_err = grid
            .iter()
            .zip(&c.density)
            .map(|(x, d)| (d - INV_SQRT_2PI * (-0.5 * x * x).exp()).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 0.02, "{max_err}");
    }

    #[test]
    fn degenerate_without_bandwidth() {
        assert!(matches!(
            kde(&[2.0, 2.0, 2.0], &[1.0; 3], None, &[2.0]),
            Err(Error::DegenerateSample(_))
        ));
        assert!(kde(&[2.0, 2.0, 2.0], &[1.0; 3], Some(0.1), &[2.0]).is_ok());
        assert!(kde(&[1.0, 2.0], &[1.0, -1.0], Some(0.1), &[2.0]).is_err());
    }

    #[test]
    fn mixture_equals_pooled_density() {
        let groups = vec![
            (vec![1.0, 1.2, 1.9], vec![1.0, 2.0, 1.0]),
            (vec![3.0, 3.5], vec![0.5, 0.5]),
            (vec![2.2, 2.4, 2.5, 2.6], vec![1.0; 4]),
        ];
        let grid: Vec<f64> = (0..50).map(|i| 0.1 * i as f64).collect();
        let mix = kde_mixture(&groups, None, &grid).unwrap();
        let pooled_v: Vec<f64> = groups.iter().flat_map(|g| g.0.clone()).collect();
        let pooled_w: Vec<f64> = groups.iter().flat_map(|g| g.1.clone()).collect();
        let pooled = kde(&pooled_v, &pooled_w, Some(mix.bandwidth), &grid).unwrap();
        for (a, b) in mix.total.iter().zip(&pooled.density) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((mix.fractions.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        let w = [1.0; 4];
        // midpoint cdf: 0.125, 0.375, 0.625, 0.875
        assert!((weighted_quantile(&v, &w, 0.5) - 2.5).abs() < 1e-12);
        assert!((weighted_quantile(&v, &w, 0.25) - 1.5).abs() < 1e-12);
        assert_eq!(weighted_quantile(&v, &w, 0.01), 1.0);
        assert_eq!(weighted_quantile(&v, &w, 0.99), 4.0);
    }
}
