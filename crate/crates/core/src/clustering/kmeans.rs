use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{canonical_relabel, member_means, squared_distance, ZoneAssignment};
use crate::error::{Error, Result};
use crate::transforms::PatternMatrix;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// k distinct rows drawn uniformly, as R's `kmeans` does.
    #[default]
    Random,
    KMeansPlusPlus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub nstart: usize,
    pub max_iter: usize,
    pub seed: u64,
    pub init: Init,
}

impl KMeansConfig {
    pub fn new(k: usize, nstart: usize, seed: u64) -> Self {
        Self {
            k,
            nstart,
            max_iter: 100,
            seed,
            init: Init::Random,
        }
    }
}

/// Outcome of one Lloyd's run from a fixed set of initial centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydRun {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub wss: f64,
    /// WSS after each centroid update.
    pub wss_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// RNG stream for one restart. Depends only on `(seed, restart)`, so the
/// first `m` restarts are identical for every `nstart >= m`.
pub fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// Best of `nstart` restarts by WSS (earliest restart wins ties), with
/// labels renumbered in order of first member row.
pub fn kmeans(patterns: &PatternMatrix, cfg: &KMeansConfig) -> Result<ZoneAssignment> {
    let runs = kmeans_restarts(patterns, cfg)?;
    let best = runs
        .into_iter()
        .reduce(|best, run| if run.wss < best.wss { run } else { best })
        .expect("nstart >= 1");
    let (labels, map) = canonical_relabel(&best.labels, cfg.k);
    let mut centroids = vec![Vec::new(); cfg.k];
    for (old, c) in best.centroids.into_iter().enumerate() {
        centroids[map[old]] = c;
    }
    Ok(ZoneAssignment {
        labels,
        centroids,
        wss: best.wss,
        k: cfg.k,
        seed: cfg.seed,
    })
}

/// Every restart's result, in restart order.
pub fn kmeans_restarts(patterns: &PatternMatrix, cfg: &KMeansConfig) -> Result<Vec<LloydRun>> {
    let n = patterns.n_rows();
    if cfg.k == 0 || cfg.nstart == 0 || cfg.max_iter == 0 {
        return Err(Error::InvalidParameter(
            "k, nstart and max_iter must be positive".into(),
        ));
    }
    if n < cfg.k {
        return Err(Error::TooFewRows {
            required: cfg.k,
            found: n,
        });
    }
    if patterns.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("patterns contain non-finite values".into()));
    }
    Ok((0..cfg.nstart)
        .map(|r| {
            let mut rng = restart_rng(cfg.seed, r);
            let init = match cfg.init {
                Init::Random => random_rows(patterns, cfg.k, &mut rng),
                Init::KMeansPlusPlus => plus_plus(patterns, cfg.k, &mut rng),
            };
            lloyd(patterns, init, cfg.max_iter)
        })
        .collect())
}

fn random_rows(patterns: &PatternMatrix, k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    index::sample(rng, patterns.n_rows(), k)
        .into_iter()
        .map(|i| patterns.row(i).to_vec())
        .collect()
}

fn plus_plus(patterns: &PatternMatrix, k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = patterns.n_rows();
    let mut centroids = vec![patterns.row(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = patterns
        .rows()
        .map(|r| squared_distance(r, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = patterns.row(pick).to_vec();
        for (d, r) in d2.iter_mut().zip(patterns.rows()) {
            *d = d.min(squared_distance(r, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn nearest(row: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = squared_distance(row, c);
        // strict comparison keeps the lowest index on ties
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

/// Lloyd's iterations from `init` until assignments stop changing or
/// `max_iter` updates have been made.
pub fn lloyd(patterns: &PatternMatrix, init: Vec<Vec<f64>>, max_iter: usize) -> LloydRun {
    let k = init.len();
    let mut centroids = init;
    let mut labels: Vec<usize> = patterns.rows().map(|r| nearest(r, &centroids)).collect();
    let mut wss_trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iter {
        centroids = update_centroids(patterns, &mut labels, &centroids, k);
        iterations += 1;
        wss_trace.push(objective(patterns, &labels, &centroids));

        let next: Vec<usize> = patterns.rows().map(|r| nearest(r, &centroids)).collect();
        if next == labels {
            converged = true;
            break;
        }
        labels = next;
    }
    if !converged {
        centroids = update_centroids(patterns, &mut labels, &centroids, k);
    }
    let wss = objective(patterns, &labels, &centroids);
    LloydRun {
        labels,
        centroids,
        wss,
        wss_trace,
        iterations,
        converged,
    }
}

/// Member means; an empty cluster takes over the point farthest from its
/// current centroid (among clusters with more than one member).
fn update_centroids(
    patterns: &PatternMatrix,
    labels: &mut [usize],
    previous: &[Vec<f64>],
    k: usize,
) -> Vec<Vec<f64>> {
    let mut means = member_means(patterns, labels, k);
    while let Some(empty) = means.iter().position(Option::is_none) {
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let donor = patterns
            .rows()
            .zip(labels.iter())
            .enumerate()
            .filter(|(_, (_, &l))| counts[l] > 1)
            .map(|(i, (r, &l))| {
                let mu = means[l].as_ref().expect("nonempty");
                (i, squared_distance(r, mu))
            })
            .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            });
        match donor {
            Some((i, _)) => {
                labels[i] = empty;
                means = member_means(patterns, labels, k);
            }
            // only possible when n < k, which callers reject
            None => {
                means[empty] = Some(previous[empty].clone());
            }
        }
    }
    means.into_iter().map(|m| m.expect("filled")).collect()
}

fn objective(patterns: &PatternMatrix, labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    patterns
        .rows()
        .zip(labels)
        .map(|(r, &l)| squared_distance(r, &centroids[l]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{adjusted_rand_index, wss};
    use crate::transforms::PatternKind;
    use rand_distr::{Distribution, Normal};

    fn blobs(per: usize, sep: f64, seed: u64) -> (PatternMatrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let centers = [[0.0, 0.0, 0.0], [sep, 0.0, 0.0], [0.0, sep, 0.0]];
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for (z, c) in centers.iter().enumerate() {
            for _ in 0..per {
                rows.push(c.iter().map(|x| x + noise.sample(&mut rng)).collect());
                truth.push(z);
            }
        }
        (PatternMatrix::unlabeled(PatternKind::RawLogHec, rows).unwrap(), truth)
    }

    #[test]
    fn single_zone_is_the_column_mean() {
        let (m, _) = blobs(20, 6.0, 1);
        let z = kmeans(&m, &KMeansConfig::new(1, 3, 0)).unwrap();
        let n = m.n_rows() as f64;
        for c in 0..m.n_cols() {
            let mean: f64 = m.rows().map(|r| r[c]).sum::<f64>() / n;
            assert!((z.centroids[0][c] - mean).abs() < 1e-12);
        }
        let total: f64 = m
            .rows()
            .map(|r| squared_distance(r, &z.centroids[0]))
            .sum();
        assert!((z.wss - total).abs() < 1e-9);
    }

    #[test]
    fn n_equals_k_gives_singletons() {
        let rows = vec![vec![0.0, 1.0], vec![5.0, 5.0], vec![-3.0, 2.0]];
        let m = PatternMatrix::unlabeled(PatternKind::RawLogHec, rows).unwrap();
        let z = kmeans(&m, &KMeansConfig::new(3, 5, 9)).unwrap();
        assert_eq!(z.labels, vec![0, 1, 2]);
        assert_eq!(z.wss, 0.0);
    }

    #[test]
    fn too_few_rows() {
        let m = PatternMatrix::unlabeled(PatternKind::RawLogHec, vec![vec![0.0]; 2]).unwrap();
        assert!(matches!(
            kmeans(&m, &KMeansConfig::new(3, 1, 0)),
            Err(Error::TooFewRows { required: 3, found: 2 })
        ));
    }

    #[test]
    fn recovers_planted_blobs() {
        for seed in 0..5 {
            let (m, truth) = blobs(60, 5.0 * 3.0, seed);
            let z = kmeans(&m, &KMeansConfig::new(3, 25, seed)).unwrap();
            assert!(adjusted_rand_index(&z.labels, &truth).unwrap() >= 0.99);
            for (c, mean) in z.centroids.iter().zip(member_means(&m, &z.labels, 3)) {
                let mean = mean.unwrap();
                assert!(c.iter().zip(&mean).all(|(a, b)| (a - b).abs() < 1e-9));
            }
            assert!((wss(&m, &z.labels) - z.wss).abs() < 1e-9);
        }
    }

    #[test]
    fn beats_random_labels() {
        let (m, _) = blobs(40, 4.0, 3);
        let z = kmeans(&m, &KMeansConfig::new(3, 10, 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let random: Vec<usize> = (0..m.n_rows()).map(|_| rng.random_range(0..3)).collect();
        assert!(z.wss < wss(&m, &random));
    }

    #[test]
    fn wss_never_increases_within_a_run() {
        let (m, _) = blobs(50, 2.0, 11);
        for init in [Init::Random, Init::KMeansPlusPlus] {
            let cfg = KMeansConfig {
                init,
                ..KMeansConfig::new(6, 20, 4)
            };
            for run in kmeans_restarts(&m, &cfg).unwrap() {
                for w in run.wss_trace.windows(2) {
                    assert!(w[1] <= w[0] + 1e-12, "{:?}", run.wss_trace);
                }
                assert!(run.wss <= run.wss_trace[0] + 1e-12);
            }
        }
    }

    #[test]
    fn more_restarts_never_worse() {
        let (m, _) = blobs(40, 2.0, 5);
        let mut last = f64::INFINITY;
        for nstart in [1, 2, 5, 10, 25] {
            let z = kmeans(&m, &KMeansConfig::new(5, nstart, 17)).unwrap();
            assert!(z.wss <= last);
            last = z.wss;
        }
    }

    #[test]
    fn empty_cluster_is_reseeded() {
        // two identical initial centroids leave one cluster empty
        let rows = vec![vec![0.0], vec![0.1], vec![10.0], vec![10.2]];
        let m = PatternMatrix::unlabeled(PatternKind::RawLogHec, rows).unwrap();
        let run = lloyd(&m, vec![vec![0.0], vec![0.0]], 100);
        assert!(run.converged);
        let mut sizes = [0; 2];
        run.labels.iter().for_each(|&l| sizes[l] += 1);
        assert_eq!(sizes, [2, 2]);
        assert!((run.wss - (0.005 + 0.02)).abs() < 1e-12);
    }

    #[test]
    fn deterministic_for_seed() {
        let (m, _) = blobs(30, 3.0, 2);
        let cfg = KMeansConfig::new(4, 8, 123);
        assert_eq!(kmeans(&m, &cfg).unwrap(), kmeans(&m, &cfg).unwrap());
    }
}
