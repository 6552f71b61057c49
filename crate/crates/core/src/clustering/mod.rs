//! Clustering over precomputed dissimilarities.
//!
//! Clusterers are interchangeable strategies behind [`Clusterer`]; the
//! [`ClustererRegistry`] maps configuration names to constructors.

mod hierarchical;
mod pam;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::distance::Dissimilarity;
use crate::error::{Error, Result};

pub use hierarchical::{hierarchical_cluster, Hierarchical, Linkage};
pub use pam::{k_medoids, Pam, PamInit};

/// A hard partition of `n` points into `k` non-empty clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub k: usize,
    pub assignment: Vec<usize>,
    /// Medoid id of each cluster, indexed by cluster id.
    pub medoids: Vec<usize>,
    pub distortion: f64,
    pub alpha: f64,
    pub method_tag: String,
}

impl Clustering {
    /// Builds a clustering from any labeling: clusters are renumbered in order
    /// of their smallest member, medoids are filled in as clustroids and the
    /// distortion is computed under `dist`.
    pub fn from_labels(
        labels: &[usize],
        dist: &dyn Dissimilarity,
        alpha: f64,
        method_tag: impl Into<String>,
    ) -> Result<Self> {
        if labels.len() != dist.len() {
            return Err(Error::LengthMismatch {
                left: labels.len(),
                right: dist.len(),
            });
        }
        if labels.is_empty() {
            return Err(Error::Empty("labels"));
        }
        let assignment = canonical_labels(labels);
        let k = assignment.iter().max().map_or(0, |m| m + 1);
        let members = members_of(&assignment, k);
        let medoids = members
            .iter()
            .map(|m| clustroid(m, dist))
            .collect::<Result<Vec<_>>>()?;
        let mut c = Self {
            k,
            assignment,
            medoids,
            distortion: 0.0,
            alpha,
            method_tag: method_tag.into(),
        };
        c.distortion = distortion(&c, dist);
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Member ids of each cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        members_of(&self.assignment, self.k)
    }

    /// True when both clusterings induce the same partition of the points.
    pub fn same_partition(&self, other: &Clustering) -> bool {
        canonical_labels(&self.assignment) == canonical_labels(&other.assignment)
    }

    /// Checks the structural invariants. With `nearest` set, also checks that
    /// each non-medoid sits with its nearest medoid (lowest id on ties).
    pub fn validate(&self, dist: &dyn Dissimilarity, nearest: bool) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidInput(m));
        if self.medoids.len() != self.k {
            return fail(format!("{} medoids for k={}", self.medoids.len(), self.k));
        }
        let members = self.members();
        if let Some(c) = members.iter().position(Vec::is_empty) {
            return fail(format!("cluster {c} is empty"));
        }
        for (c, &m) in self.medoids.iter().enumerate() {
            if self.assignment.get(m) != Some(&c) {
                return fail(format!("medoid {m} not in its cluster {c}"));
            }
        }
        let recomputed = distortion(self, dist);
        if (recomputed - self.distortion).abs() > 1e-9 * (1.0 + recomputed.abs()) {
            return fail(format!(
                "stored distortion {} != recomputed {recomputed}",
                self.distortion
            ));
        }
        if nearest {
            for (p, &c) in self.assignment.iter().enumerate() {
                if self.medoids.contains(&p) {
                    continue;
                }
                let expect = nearest_medoid(p, &self.medoids, dist);
                if expect != c {
                    return fail(format!("point {p} assigned to {c}, nearest is {expect}"));
                }
            }
        }
        Ok(())
    }
}

/// Relabels clusters in order of first appearance.
pub(crate) fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = BTreeMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

fn members_of(assignment: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); k];
    for (p, &c) in assignment.iter().enumerate() {
        out[c].push(p);
    }
    out
}

/// Index into `medoids` of the closest medoid to `p`; ties toward the lowest
/// medoid id.
pub(crate) fn nearest_medoid(p: usize, medoids: &[usize], dist: &dyn Dissimilarity) -> usize {
    let mut best = 0;
    for (c, &m) in medoids.iter().enumerate().skip(1) {
        let (d, bd) = (dist.get(p, m), dist.get(p, medoids[best]));
        if d < bd || (d == bd && m < medoids[best]) {
            best = c;
        }
    }
    best
}

/// The member with the lowest mean squared distance to the other members.
pub fn clustroid(members: &[usize], dist: &dyn Dissimilarity) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &m in members {
        let cost: f64 = members.iter().map(|&o| dist.get(m, o).powi(2)).sum();
        match best {
            Some((bm, bc)) if cost > bc || (cost == bc && m > bm) => {}
            _ => best = Some((m, cost)),
        }
    }
    best.map(|(m, _)| m)
        .ok_or(Error::Empty("clustroid of no members"))
}

/// Sum of squared distances from each point to its cluster's medoid.
pub fn distortion(clustering: &Clustering, dist: &dyn Dissimilarity) -> f64 {
    clustering
        .assignment
        .iter()
        .enumerate()
        .map(|(p, &c)| dist.get(p, clustering.medoids[c]).powi(2))
        .sum()
}

/// Total within-cluster variance around arithmetic-mean centroids.
pub fn within_cluster_variance(clustering: &Clustering, series: &[Vec<f64>]) -> Result<f64> {
    if series.len() != clustering.len() {
        return Err(Error::LengthMismatch {
            left: clustering.len(),
            right: series.len(),
        });
    }
    let len = series.first().map_or(0, Vec::len);
    if let Some(bad) = series.iter().find(|s| s.len() != len) {
        return Err(Error::LengthMismatch {
            left: len,
            right: bad.len(),
        });
    }
    let mut total = 0.0;
    for members in clustering.members() {
        let mut centroid = vec![0.0; len];
        for &m in &members {
            for (c, v) in centroid.iter_mut().zip(&series[m]) {
                *c += v;
            }
        }
        let size = members.len() as f64;
        centroid.iter_mut().for_each(|c| *c /= size);
        for &m in &members {
            total += series[m]
                .iter()
                .zip(&centroid)
                .map(|(v, c)| (v - c) * (v - c))
                .sum::<f64>();
        }
    }
    Ok(total)
}

/// Picks the `k` maximizing `D(k-1) - 2 D(k) + D(k+1)` over interior points
/// of a contiguous grid; ties go to the smallest `k`.
pub fn elbow_k(distortions: &BTreeMap<usize, f64>) -> Result<usize> {
    if distortions.len() < 3 {
        return Err(Error::param("distortions", "need at least 3 grid points"));
    }
    let ks: Vec<usize> = distortions.keys().copied().collect();
    if ks.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::param("distortions", "k grid must be contiguous"));
    }
    if distortions.values().any(|d| !d.is_finite()) {
        return Err(Error::param("distortions", "values must be finite"));
    }
    let d: Vec<f64> = distortions.values().copied().collect();
    let tol = 1e-9 * d.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let mut best = (ks[1], f64::NEG_INFINITY);
    for i in 1..d.len() - 1 {
        let second = d[i - 1] - 2.0 * d[i] + d[i + 1];
        if second > best.1 + tol {
            best = (ks[i], second);
        }
    }
    Ok(best.0)
}

/// A clustering strategy over a precomputed dissimilarity.
pub trait Clusterer: Send + Sync {
    fn name(&self) -> &'static str;

    fn cluster(&self, dist: &dyn Dissimilarity, k: usize, seed: u64) -> Result<Clustering>;
}

impl fmt::Debug for dyn Clusterer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Clusterer({})", self.name())
    }
}

/// Options consulted by registry constructors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClustererOptions {
    #[serde(default)]
    pub linkage: Linkage,
    #[serde(default)]
    pub init: PamInit,
}

type ClustererCtor = fn(&ClustererOptions) -> Arc<dyn Clusterer>;

/// Name-keyed registry of clustering strategies.
pub struct ClustererRegistry {
    entries: BTreeMap<&'static str, (&'static str, ClustererCtor)>,
}

impl Default for ClustererRegistry {
    fn default() -> Self {
        let mut r = Self {
            entries: BTreeMap::new(),
        };
        r.register(
            "pam",
            "k-medoids (BUILD + SWAP) on squared distances",
            |o| Arc::new(Pam { init: o.init }),
        );
        r.register("hierarchical", "agglomerative clustering cut at k", |o| {
            Arc::new(Hierarchical { linkage: o.linkage })
        });
        r
    }
}

impl ClustererRegistry {
    pub fn register(&mut self, name: &'static str, description: &'static str, ctor: ClustererCtor) {
        self.entries.insert(name, (description, ctor));
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn describe(&self) -> Vec<(&'static str, &'static str)> {
        self.entries.iter().map(|(n, (d, _))| (*n, *d)).collect()
    }

    pub fn create(&self, name: &str, options: &ClustererOptions) -> Result<Arc<dyn Clusterer>> {
        self.entries
            .get(name)
            .map(|(_, ctor)| ctor(options))
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "clusterer",
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::{DenseMatrix, FnDissimilarity};

    fn line(points: &[f64]) -> DenseMatrix {
        DenseMatrix::from_rows(
            points
                .iter()
                .map(|a| points.iter().map(|b| (a - b).abs()).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn clustroid_examples() {
        let d = line(&[0.0, 1.0, 2.0, 10.0, 5.0, 5.0, 5.0, 5.0]);
        assert_eq!(clustroid(&[7], &d).unwrap(), 7);
        assert_eq!(clustroid(&[1, 2], &d).unwrap(), 1);
        // brute force: mean squared distance of each candidate to the others
        let members = [0usize, 1, 2, 3];
        let oracle = members
            .iter()
            .copied()
            .min_by(|&a, &b| {
                let cost = |m: usize| {
                    members
                        .iter()
                        .filter(|&&o| o != m)
                        .map(|&o| d.get(m, o).powi(2))
                        .sum::<f64>()
                        / 3.0
                };
                cost(a).partial_cmp(&cost(b)).unwrap()
            })
            .unwrap();
        assert_eq!(oracle, 2);
        assert_eq!(clustroid(&members, &d).unwrap(), oracle);
        assert!(clustroid(&[], &d).is_err());
    }

    #[test]
    fn distortion_examples() {
        let same = FnDissimilarity::new(4, |_, _| 0.0);
        let c = Clustering::from_labels(&[0, 0, 1, 1], &same, 0.0, "t").unwrap();
        assert_eq!(c.distortion, 0.0);

        let pair = line(&[0.0, 3.0]);
        let c = Clustering::from_labels(&[0, 0], &pair, 0.0, "t").unwrap();
        assert_eq!(c.medoids, vec![0]);
        assert_eq!(c.distortion, 9.0);

        // points 0,1,4 | 10,12 ; clustroids 1 and 10 (tie -> lower id)
        let toy = line(&[0.0, 1.0, 4.0, 10.0, 12.0]);
        let c = Clustering::from_labels(&[0, 0, 0, 1, 1], &toy, 0.0, "t").unwrap();
        assert_eq!(c.medoids, vec![1, 3]);
        // 1^2 + 0 + 3^2 + 0 + 2^2
        assert_eq!(c.distortion, 14.0);
        c.validate(&toy, false).unwrap();
    }

    #[test]
    fn from_labels_renumbers_by_first_member() {
        let d = line(&[0.0, 1.0, 2.0]);
        let c = Clustering::from_labels(&[5, 2, 5], &d, 0.0, "t").unwrap();
        assert_eq!(c.assignment, vec![0, 1, 0]);
        assert_eq!(c.k, 2);
    }

    #[test]
    fn variance_examples() {
        let series = vec![vec![0.0, 0.0], vec![2.0, 0.0]];
        let d = FnDissimilarity::new(2, |_, _| 1.0);
        let one = Clustering::from_labels(&[0, 0], &d, 0.0, "t").unwrap();
        assert_eq!(within_cluster_variance(&one, &series).unwrap(), 2.0);
        let single = Clustering::from_labels(&[0, 1], &d, 0.0, "t").unwrap();
        assert_eq!(within_cluster_variance(&single, &series).unwrap(), 0.0);

        // three clusters: {[0],[2]} -> 2, {[5],[6],[7]} -> 2, {[10]} -> 0
        let s3: Vec<Vec<f64>> = [0.0, 2.0, 5.0, 6.0, 7.0, 10.0]
            .iter()
            .map(|&v| vec![v])
            .collect();
        let d6 = FnDissimilarity::new(6, |_, _| 1.0);
        let c3 = Clustering::from_labels(&[0, 0, 1, 1, 1, 2], &d6, 0.0, "t").unwrap();
        assert_eq!(within_cluster_variance(&c3, &s3).unwrap(), 4.0);
        assert!(within_cluster_variance(&one, &[vec![0.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn elbow_examples() {
        let grid = |vals: &[f64]| -> BTreeMap<usize, f64> {
            vals.iter().enumerate().map(|(i, &v)| (i + 3, v)).collect()
        };
        // second differences: k=4 -> 100-40+15 = 75, k=5 -> 20-30+14 = 4
        assert_eq!(elbow_k(&grid(&[100.0, 20.0, 15.0, 14.0])).unwrap(), 4);
        assert_eq!(elbow_k(&grid(&[10.0, 8.0, 6.0, 4.0, 2.0])).unwrap(), 4);
        // knee at k=6: steep drop to 6, flat after
        assert_eq!(
            elbow_k(&grid(&[90.0, 70.0, 50.0, 30.0, 28.0, 26.0, 24.0])).unwrap(),
            6
        );
        assert!(elbow_k(&grid(&[1.0, 2.0])).is_err());
        let mut gap = grid(&[3.0, 2.0, 1.0]);
        gap.insert(9, 0.5);
        assert!(elbow_k(&gap).is_err());
    }

    #[test]
    fn registry_resolves_names() {
        let r = ClustererRegistry::default();
        assert_eq!(r.names(), vec!["hierarchical", "pam"]);
        assert_eq!(
            r.create("pam", &ClustererOptions::default())
                .unwrap()
                .name(),
            "pam"
        );
        let err = r
            .create("dbscan", &ClustererOptions::default())
            .unwrap_err();
        assert!(err.to_string().contains("hierarchical, pam"));
    }
}
