use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{nearest_medoid, Clusterer, Clustering};
use crate::distance::Dissimilarity;
use crate::error::{Error, Result};
use crate::seed;

/// How PAM picks its starting medoids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PamInit {
    /// Greedy BUILD; ignores the seed.
    #[default]
    Build,
    /// `k` distinct points drawn from the seed.
    Random,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Pam {
    pub init: PamInit,
}

impl Clusterer for Pam {
    fn name(&self) -> &'static str {
        "pam"
    }

    fn cluster(&self, dist: &dyn Dissimilarity, k: usize, seed: u64) -> Result<Clustering> {
        k_medoids(dist, k, seed, self.init)
    }
}

// Minimum swap improvement.
const EPS: f64 = 1e-12;

/// Partitioning around medoids minimizing the sum of squared distances to the
/// nearest medoid.
///
/// All ties resolve toward the lowest index: BUILD candidates, swap pairs
/// (scanned medoid-major, then candidate id) and final assignment.
pub fn k_medoids(
    dist: &dyn Dissimilarity,
    k: usize,
    seed: u64,
    init: PamInit,
) -> Result<Clustering> {
    let n = dist.len();
    if k < 1 {
        return Err(Error::param("k", "must be at least 1"));
    }
    if k > n {
        return Err(Error::param("k", format!("{k} exceeds the {n} points")));
    }
    let sq = |i: usize, j: usize| {
        let d = dist.get(i, j);
        d * d
    };

    let mut medoids = match init {
        PamInit::Build => build(n, k, &sq),
        PamInit::Random => {
            let mut m = sample(&mut seed::rng(seed), n, k).into_vec();
            m.sort_unstable();
            m
        }
    };

    // nearest / second-nearest squared distance for every point
    let mut is_medoid = vec![false; n];
    loop {
        is_medoid.iter_mut().for_each(|b| *b = false);
        medoids.iter().for_each(|&m| is_medoid[m] = true);
        let (near, second) = nearest_two(n, &medoids, &sq);

        let mut best: Option<(f64, usize, usize)> = None;
        for mi in 0..medoids.len() {
            for o in (0..n).filter(|&o| !is_medoid[o]) {
                // cost change of replacing m by o
                let mut delta = 0.0;
                for p in 0..n {
                    let d_po = sq(p, o);
                    let (nidx, nd) = near[p];
                    if nidx == mi {
                        delta += d_po.min(second[p]) - nd;
                    } else if d_po < nd {
                        delta += d_po - nd;
                    }
                }
                if delta < -EPS && best.is_none_or(|(bd, _, _)| delta < bd - EPS) {
                    best = Some((delta, mi, o));
                }
            }
        }
        match best {
            Some((_, mi, o)) => {
                medoids[mi] = o;
            }
            None => break,
        }
    }
    medoids.sort_unstable();

    let mut assignment: Vec<usize> = (0..n).map(|p| nearest_medoid(p, &medoids, dist)).collect();
    for (c, &m) in medoids.iter().enumerate() {
        assignment[m] = c;
    }
    let mut clustering = Clustering {
        k,
        assignment,
        medoids,
        distortion: 0.0,
        alpha: 0.0,
        method_tag: "pam".into(),
    };
    clustering.distortion = super::distortion(&clustering, dist);
    Ok(clustering)
}

fn build(n: usize, k: usize, sq: &dyn Fn(usize, usize) -> f64) -> Vec<usize> {
    let first = (0..n)
        .map(|i| (i, (0..n).map(|j| sq(i, j)).sum::<f64>()))
        .fold(
            (0, f64::INFINITY),
            |best, (i, c)| if c < best.1 { (i, c) } else { best },
        )
        .0;
    let mut medoids = vec![first];
    let mut nearest: Vec<f64> = (0..n).map(|p| sq(p, first)).collect();
    while medoids.len() < k {
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for c in (0..n).filter(|c| !medoids.contains(c)) {
            let gain: f64 = (0..n).map(|p| (nearest[p] - sq(p, c)).max(0.0)).sum();
            if gain > best.1 {
                best = (c, gain);
            }
        }
        let c = best.0;
        medoids.push(c);
        for (p, v) in nearest.iter_mut().enumerate() {
            *v = v.min(sq(p, c));
        }
    }
    medoids
}

#[allow(clippy::type_complexity)]
fn nearest_two(
    n: usize,
    medoids: &[usize],
    sq: &dyn Fn(usize, usize) -> f64,
) -> (Vec<(usize, f64)>, Vec<f64>) {
    let mut near = Vec::with_capacity(n);
    let mut second = Vec::with_capacity(n);
    for p in 0..n {
        let (mut b1, mut d1, mut d2) = (0usize, f64::INFINITY, f64::INFINITY);
        for (mi, &m) in medoids.iter().enumerate() {
            let d = sq(p, m);
            if d < d1 {
                d2 = d1;
                b1 = mi;
                d1 = d;
            } else if d < d2 {
                d2 = d;
            }
        }
        near.push((b1, d1));
        second.push(d2);
    }
    (near, second)
}
