use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clustering::Clustering;
use crate::distance::Dissimilarity;
use crate::error::{Error, Result};
use crate::seed;

/// Locus-based adjacency: node `i` is linked to `links[i]`, and clusters are
/// the connected components of those links.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Genome {
    pub links: Vec<usize>,
}

impl Genome {
    pub fn identity(n: usize) -> Self {
        Self {
            links: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Component label of every node, numbered by smallest member.
    pub fn labels(&self) -> Vec<usize> {
        let n = self.links.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (i, &j) in self.links.iter().enumerate() {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                // keep the smaller id as root
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                parent[hi] = lo;
            }
        }
        let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        roots
            .iter()
            .map(|&r| {
                if label[r] == usize::MAX {
                    label[r] = next;
                    next += 1;
                }
                label[r]
            })
            .collect()
    }

    /// Stable 64-bit FNV-1a hash of the links.
    pub fn hash64(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for &l in &self.links {
            for b in (l as u64).to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

/// Encodes each cluster as a minimum spanning tree grown by Prim's algorithm
/// from its lowest-id member (ties to the lowest ids).
///
/// When the tree edge `i -> j` adds `j`, `links[i] = j` is used if `i` is
/// still self-linked, otherwise `links[j] = i`; either way the edge is
/// recorded once and `j` joins the component.
pub fn encode(clustering: &Clustering, dist: &dyn Dissimilarity) -> Result<Genome> {
    let n = clustering.len();
    if dist.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: dist.len(),
        });
    }
    let mut g = Genome::identity(n);
    for members in clustering.members() {
        let Some(&start) = members.first() else {
            continue;
        };
        let mut in_tree = vec![start];
        let mut rest: Vec<usize> = members[1..].to_vec();
        while !rest.is_empty() {
            let mut best = (f64::INFINITY, usize::MAX, usize::MAX, 0);
            for (pos, &j) in rest.iter().enumerate() {
                for &i in &in_tree {
                    let d = dist.get(i, j);
                    if d < best.0 || (d == best.0 && (j, i) < (best.2, best.1)) {
                        best = (d, i, j, pos);
                    }
                }
            }
            let (_, i, j, pos) = best;
            if g.links[i] == i {
                g.links[i] = j;
            } else {
                g.links[j] = i;
            }
            in_tree.push(j);
            rest.remove(pos);
        }
    }
    Ok(g)
}

/// Clusters are the link components; medoids and distortion are taken under
/// `dist`.
pub fn decode(genome: &Genome, dist: &dyn Dissimilarity, tag: &str) -> Result<Clustering> {
    if genome.links.iter().any(|&l| l >= genome.len()) {
        return Err(Error::InvalidInput("genome link out of range".into()));
    }
    Clustering::from_labels(&genome.labels(), dist, 0.0, tag)
}

/// Child taking `links[i]` from `a` on a seeded half of the positions and
/// from `b` elsewhere.
pub fn crossover(a: &Genome, b: &Genome, seed: u64) -> Result<Genome> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len();
    let mut from_a = vec![false; n];
    for i in sample(&mut seed::rng(seed), n, n / 2) {
        from_a[i] = true;
    }
    Ok(crossover_with_mask(a, b, &from_a))
}

pub fn crossover_with_mask(a: &Genome, b: &Genome, from_a: &[bool]) -> Genome {
    Genome {
        links: (0..a.len())
            .map(|i| if from_a[i] { a.links[i] } else { b.links[i] })
            .collect(),
    }
}

/// For every node, the union of its `count` nearest neighbors under each
/// dissimilarity, ascending by id; ties in distance go to lower ids.
pub fn neighbor_lists(dists: &[&dyn Dissimilarity], count: usize) -> Vec<Vec<usize>> {
    let n = dists.first().map_or(0, |d| d.len());
    (0..n)
        .map(|i| {
            let mut pool = Vec::new();
            for d in dists {
                let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                others.sort_by(|&x, &y| d.get(i, x).total_cmp(&d.get(i, y)).then(x.cmp(&y)));
                pool.extend(others.into_iter().take(count));
            }
            pool.sort_unstable();
            pool.dedup();
            pool
        })
        .collect()
}

/// Each position, with probability `rate`, is relinked to a uniform member of
/// the neighbor list of its current target.
pub fn mutate(genome: &Genome, rate: f64, neighbors: &[Vec<usize>], seed: u64) -> Result<Genome> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::param("mutation rate", "must lie in [0, 1]"));
    }
    if neighbors.len() != genome.len() {
        return Err(Error::LengthMismatch {
            left: genome.len(),
            right: neighbors.len(),
        });
    }
    let mut rng = seed::rng(seed);
    let mut out = genome.clone();
    for slot in out.links.iter_mut() {
        if rng.random::<f64>() < rate {
            let pool = &neighbors[*slot];
            if !pool.is_empty() {
                *slot = pool[rng.random_range(0..pool.len())];
            }
        }
    }
    Ok(out)
}
