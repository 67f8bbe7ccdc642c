use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{kmeans, squared_distance, Init, KMeansConfig, ZoneAssignment};
use crate::error::{Error, Result};
use crate::transforms::PatternMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityEntry {
    /// Rows that received more than one aligned label across runs.
    pub changed: usize,
    pub total: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityTable {
    pub ks: Vec<usize>,
    pub nstarts: Vec<usize>,
    pub runs: usize,
    #[serde(with = "entries_as_list")]
    pub entries: BTreeMap<(usize, usize), StabilityEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilityConfig {
    pub ks: Vec<usize>,
    pub nstarts: Vec<usize>,
    pub runs: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl StabilityConfig {
    /// The full grid: k in 2..=12, nstart in
    /// {10, 25, 50, 100, 250}, ten runs per cell.
    pub fn reference(seed: u64) -> Self {
        Self {
            ks: (2..=12).collect(),
            nstarts: vec![10, 25, 50, 100, 250],
            runs: 10,
            max_iter: 100,
            seed,
        }
    }
}

/// Seed for run `r`. Independent of `k` and `nstart` so that a larger
/// nstart extends the same restart streams.
fn run_seed(seed: u64, run: usize) -> u64 {
    let mut z = seed ^ (run as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Repeats k-means `runs` times for every `(k, nstart)` and counts rows
/// whose label, after aligning each run's zones to run 0 by greedy
/// nearest-centroid matching, is not the same in every run.
pub fn stability_analysis(patterns: &PatternMatrix, cfg: &StabilityConfig) -> Result<StabilityTable> {
    if cfg.runs < 2 {
        return Err(Error::InvalidParameter("stability needs at least 2 runs".into()));
    }
    let total = patterns.n_rows();
    let mut entries = BTreeMap::new();
    for &k in &cfg.ks {
        for &nstart in &cfg.nstarts {
            let runs = (0..cfg.runs)
                .map(|r| {
                    kmeans(
                        patterns,
                        &KMeansConfig {
                            k,
                            nstart,
                            max_iter: cfg.max_iter,
                            seed: run_seed(cfg.seed, r),
                            init: Init::Random,
                        },
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let changed = count_changed(&runs);
            entries.insert(
                (k, nstart),
                StabilityEntry {
                    changed,
                    total,
                    fraction: if total == 0 { 0.0 } else { changed as f64 / total as f64 },
                },
            );
        }
    }
    Ok(StabilityTable {
        ks: cfg.ks.clone(),
        nstarts: cfg.nstarts.clone(),
        runs: cfg.runs,
        entries,
    })
}

fn count_changed(runs: &[ZoneAssignment]) -> usize {
    let reference = &runs[0];
    let aligned: Vec<Vec<usize>> = runs
        .iter()
        .map(|run| {
            let map = greedy_match(&run.centroids, &reference.centroids);
            run.labels.iter().map(|&l| map[l]).collect()
        })
        .collect();
    (0..reference.labels.len())
        .filter(|&i| aligned.iter().any(|labels| labels[i] != aligned[0][i]))
        .count()
}

/// Maps each cluster of `from` to a distinct cluster of `to`, taking
/// globally closest centroid pairs first.
fn greedy_match(from: &[Vec<f64>], to: &[Vec<f64>]) -> Vec<usize> {
    let k = from.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(k * k);
    for (i, a) in from.iter().enumerate() {
        for (j, b) in to.iter().enumerate() {
            pairs.push((squared_distance(a, b), i, j));
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut map = vec![usize::MAX; k];
    let mut used = vec![false; k];
    for (_, i, j) in pairs {
        if map[i] == usize::MAX && !used[j] {
            map[i] = j;
            used[j] = true;
        }
    }
    map
}

impl StabilityTable {
    pub fn get(&self, k: usize, nstart: usize) -> Option<&StabilityEntry> {
        self.entries.get(&(k, nstart))
    }

    /// One row per k, one column per nstart; cells read
    /// `changed / total = pct %`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["k".to_owned()];
        header.extend(self.nstarts.iter().map(|s| format!("nstart={s}")));
        w.write_record(&header)?;
        for &k in &self.ks {
            let mut row = vec![k.to_string()];
            for &s in &self.nstarts {
                let e = &self.entries[&(k, s)];
                row.push(format!(
                    "{} / {} = {:.1} %",
                    e.changed,
                    e.total,
                    100.0 * e.fraction
                ));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

mod entries_as_list {
    use super::StabilityEntry;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    #[derive(Serialize, Deserialize)]
    struct Row {
        k: usize,
        nstart: usize,
        #[serde(flatten)]
        entry: StabilityEntry,
    }

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<(usize, usize), StabilityEntry>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let rows: Vec<Row> = map
            .iter()
            .map(|(&(k, nstart), &entry)| Row { k, nstart, entry })
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<(usize, usize), StabilityEntry>, D::Error> {
        let rows = Vec::<Row>::deserialize(d)?;
        Ok(rows.into_iter().map(|r| ((r.k, r.nstart), r.entry)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::PatternKind;

    fn grid_points() -> PatternMatrix {
        let rows = (0..60)
            .map(|i| {
                let c = [0.0, 20.0, 40.0][i % 3];
                vec![c + (i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()]
            })
            .collect();
        PatternMatrix::unlabeled(PatternKind::RawLogHec, rows).unwrap()
    }

    #[test]
    fn single_cluster_never_changes() {
        let cfg = StabilityConfig {
            ks: vec![1],
            nstarts: vec![1, 5],
            runs: 4,
            max_iter: 100,
            seed: 3,
        };
        let t = stability_analysis(&grid_points(), &cfg).unwrap();
        for e in t.entries.values() {
            assert_eq!(e.changed, 0);
            assert_eq!(e.total, 60);
        }
    }

    #[test]
    fn separated_data_is_stable_at_true_k() {
        let cfg = StabilityConfig {
            ks: vec![3],
            nstarts: vec![10],
            runs: 5,
            max_iter: 100,
            seed: 1,
        };
        let t = stability_analysis(&grid_points(), &cfg).unwrap();
        assert_eq!(t.get(3, 10).unwrap().changed, 0);
    }

    #[test]
    fn greedy_match_is_a_permutation() {
        let from = vec![vec![10.0], vec![0.0], vec![5.0]];
        let to = vec![vec![0.1], vec![4.9], vec![9.0]];
        assert_eq!(greedy_match(&from, &to), vec![2, 0, 1]);
    }

    #[test]
    fn csv_layout() {
        let mut entries = BTreeMap::new();
        entries.insert(
            (6, 10),
            StabilityEntry {
                changed: 2970,
                total: 5474,
                fraction: 2970.0 / 5474.0,
            },
        );
        let t = StabilityTable {
            ks: vec![6],
            nstarts: vec![10],
            runs: 10,
            entries,
        };
        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "k,nstart=10\n6,2970 / 5474 = 54.3 %\n"
        );
    }

    #[test]
    fn needs_two_runs() {
        let cfg = StabilityConfig {
            ks: vec![2],
            nstarts: vec![1],
            runs: 1,
            max_iter: 10,
            seed: 0,
        };
        assert!(stability_analysis(&grid_points(), &cfg).is_err());
    }
}
