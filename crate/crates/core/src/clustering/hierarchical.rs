use serde::{Deserialize, Serialize};

use super::{Clusterer, Clustering};
use crate::distance::Dissimilarity;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Average,
    Complete,
    Single,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Hierarchical {
    pub linkage: Linkage,
}

impl Clusterer for Hierarchical {
    fn name(&self) -> &'static str {
        "hierarchical"
    }

    fn cluster(&self, dist: &dyn Dissimilarity, k: usize, _seed: u64) -> Result<Clustering> {
        hierarchical_cluster(dist, k, self.linkage)
    }
}

/// Agglomerative clustering merged down to `k` clusters, with Lance-Williams
/// updates. The closest pair merges first; ties go to the lexicographically
/// smallest pair of cluster slots. Medoids are the clusters' clustroids.
pub fn hierarchical_cluster(
    dist: &dyn Dissimilarity,
    k: usize,
    linkage: Linkage,
) -> Result<Clustering> {
    let n = dist.len();
    if k < 1 || k > n {
        return Err(Error::param("k", format!("{k} not in [1, {n}]")));
    }
    let mut d: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| dist.get(i, j)).collect())
        .collect();
    let mut size = vec![1usize; n];
    let mut alive = vec![true; n];
    // label of each point = slot of the cluster it currently belongs to
    let mut label: Vec<usize> = (0..n).collect();

    for _ in 0..(n - k) {
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for i in (0..n).filter(|&i| alive[i]) {
            for j in ((i + 1)..n).filter(|&j| alive[j]) {
                if d[i][j] < best.2 {
                    best = (i, j, d[i][j]);
                }
            }
        }
        let (a, b, _) = best;
        for x in (0..n).filter(|&x| alive[x] && x != a && x != b) {
            let (da, db) = (d[a][x], d[b][x]);
            let merged = match linkage {
                Linkage::Average => {
                    (size[a] as f64 * da + size[b] as f64 * db) / (size[a] + size[b]) as f64
                }
                Linkage::Complete => da.max(db),
                Linkage::Single => da.min(db),
            };
            d[a][x] = merged;
            d[x][a] = merged;
        }
        size[a] += size[b];
        alive[b] = false;
        for l in label.iter_mut().filter(|l| **l == b) {
            *l = a;
        }
    }
    let tag = match linkage {
        Linkage::Average => "hierarchical-average",
        Linkage::Complete => "hierarchical-complete",
        Linkage::Single => "hierarchical-single",
    };
    Clustering::from_labels(&label, dist, 0.0, tag)
}
