//! Zone inference: k-means with restarts, stability across repeated runs,
//! agglomerative ordering for heatmaps, and label-agreement metrics.

mod hierarchy;
mod kmeans;
mod metrics;
mod stability;

pub use hierarchy::{hierarchical_order, Dendrogram, Merge};
pub use kmeans::{kmeans, kmeans_restarts, lloyd, restart_rng, Init, KMeansConfig, LloydRun};
pub use metrics::adjusted_rand_index;
pub use stability::{stability_analysis, StabilityConfig, StabilityEntry, StabilityTable};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transforms::PatternMatrix;

/// Zone label per row, with member-mean centroids and the WSS objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneAssignment {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub wss: f64,
    pub k: usize,
    pub seed: u64,
}

impl ZoneAssignment {
    /// Recomputes centroids and WSS for externally supplied labels, such
    /// as ground truth or a labels file. Every zone in `0..k` must be used.
    pub fn from_labels(patterns: &PatternMatrix, labels: Vec<usize>, k: usize) -> Result<Self> {
        if labels.len() != patterns.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: patterns.n_rows(),
                found: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidParameter(format!("label {bad} outside 0..{k}")));
        }
        let centroids = member_means(patterns, &labels, k);
        let centroids = centroids
            .into_iter()
            .enumerate()
            .map(|(z, c)| c.ok_or(Error::EmptyZone(z)))
            .collect::<Result<Vec<_>>>()?;
        let wss = wss(patterns, &labels);
        Ok(Self {
            labels,
            centroids,
            wss,
            k,
            seed: 0,
        })
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Row indices belonging to each zone, in row order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            m[l].push(i);
        }
        m
    }
}

/// Total within-cluster sum of squared Euclidean distances to member means.
pub fn wss(patterns: &PatternMatrix, labels: &[usize]) -> f64 {
    let k = labels.iter().max().map_or(0, |&m| m + 1);
    let means = member_means(patterns, labels, k);
    patterns
        .rows()
        .zip(labels)
        .map(|(row, &l)| {
            let mu = means[l].as_ref().expect("label has at least this member");
            squared_distance(row, mu)
        })
        .sum()
}

pub(crate) fn member_means(
    patterns: &PatternMatrix,
    labels: &[usize],
    k: usize,
) -> Vec<Option<Vec<f64>>> {
    let cols = patterns.n_cols();
    let mut sums = vec![vec![0.0; cols]; k];
    let mut counts = vec![0usize; k];
    for (row, &l) in patterns.rows().zip(labels) {
        for (s, x) in sums[l].iter_mut().zip(row) {
            *s += x;
        }
        counts[l] += 1;
    }
    sums.into_iter()
        .zip(counts)
        .map(|(s, c)| (c > 0).then(|| s.into_iter().map(|x| x / c as f64).collect()))
        .collect()
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Renumbers labels so zones appear in order of their first member row.
pub(crate) fn canonical_relabel(labels: &[usize], k: usize) -> (Vec<usize>, Vec<usize>) {
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for &l in labels {
        if map[l] == usize::MAX {
            map[l] = next;
            next += 1;
        }
    }
    for m in map.iter_mut().filter(|m| **m == usize::MAX) {
        *m = next;
        next += 1;
    }
    (labels.iter().map(|&l| map[l]).collect(), map)
}
