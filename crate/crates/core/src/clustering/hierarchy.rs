use serde::{Deserialize, Serialize};

use super::squared_distance;
use crate::error::{Error, Result};
use crate::transforms::PatternMatrix;

/// One agglomeration step. Node ids `< n` are leaves (row indices); merge
/// `i` creates node `n + i`. `left` is the child holding the smaller leaf
/// index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n: usize,
    /// Merges in nondecreasing distance order.
    pub merges: Vec<Merge>,
    /// Leaves in dendrogram order (left subtree first).
    pub order: Vec<usize>,
}

/// Complete-linkage agglomerative clustering on Euclidean distance, using
/// the nearest-neighbour chain algorithm (O(n^2) memory and time).
pub fn hierarchical_order(patterns: &PatternMatrix) -> Result<Dendrogram> {
    let n = patterns.n_rows();
    if n < 2 {
        return Err(Error::TooFewRows {
            required: 2,
            found: n,
        });
    }

    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = squared_distance(patterns.row(i), patterns.row(j)).sqrt();
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }

    // Each active slot is named by one of its leaves; merges are recorded
    // as (leaf_a, leaf_b, distance) and ordered afterwards.
    let mut active = vec![true; n];
    let mut raw: Vec<(usize, usize, f64)> = Vec::with_capacity(n - 1);
    let mut chain: Vec<usize> = Vec::with_capacity(n);
    let mut remaining = n;

    while remaining > 1 {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).expect("active slot"));
        }
        let a = *chain.last().expect("nonempty");
        let prev = chain.len().checked_sub(2).map(|i| chain[i]);

        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        if let Some(p) = prev {
            best = p;
            best_d = dist[a * n + p];
        }
        for c in 0..n {
            if !active[c] || c == a {
                continue;
            }
            let d = dist[a * n + c];
            if d < best_d || (d == best_d && Some(best) != prev && c < best) {
                best = c;
                best_d = d;
            }
        }

        if Some(best) == prev {
            chain.pop();
            chain.pop();
            let (keep, drop) = if a < best { (a, best) } else { (best, a) };
            raw.push((keep, drop, best_d));
            for c in 0..n {
                if active[c] && c != keep && c != drop {
                    let d = dist[keep * n + c].max(dist[drop * n + c]);
                    dist[keep * n + c] = d;
                    dist[c * n + keep] = d;
                }
            }
            active[drop] = false;
            remaining -= 1;
        } else {
            chain.push(best);
        }
    }

    raw.sort_by(|x, y| x.2.total_cmp(&y.2));

    let mut parent: Vec<usize> = (0..n).collect();
    let mut node_of: Vec<usize> = (0..n).collect();
    let mut min_leaf: Vec<usize> = (0..2 * n - 1).map(|i| i.min(n)).collect();
    let mut size: Vec<usize> = vec![1; 2 * n - 1];
    let mut merges = Vec::with_capacity(n - 1);
    for (step, &(a, b, d)) in raw.iter().enumerate() {
        let ra = find(&mut parent, a);
        let rb = find(&mut parent, b);
        let (na, nb) = (node_of[ra], node_of[rb]);
        let (left, right) = if min_leaf[na] <= min_leaf[nb] {
            (na, nb)
        } else {
            (nb, na)
        };
        let node = n + step;
        min_leaf[node] = min_leaf[left];
        size[node] = size[na] + size[nb];
        merges.push(Merge {
            left,
            right,
            distance: d,
            size: size[node],
        });
        parent[rb] = ra;
        node_of[ra] = node;
    }

    let mut order = Vec::with_capacity(n);
    let mut stack = vec![2 * n - 2];
    while let Some(node) = stack.pop() {
        if node < n {
            order.push(node);
        } else {
            let m = &merges[node - n];
            stack.push(m.right);
            stack.push(m.left);
        }
    }

    Ok(Dendrogram { n, merges, order })
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}
