//! Multi-objective alternatives: evolutionary Pareto search over
//! locus-encoded partitions, lexicographic two-stage clustering and a sweep
//! of fixed blend weights.

mod baselines;
mod genome;

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use baselines::{combined_sweep, lexicographic, LexOrder, DEFAULT_SWEEP};
pub use genome::{crossover, crossover_with_mask, decode, encode, mutate, neighbor_lists, Genome};

use crate::clustering::{
    distortion, elbow_k, hierarchical_cluster, within_cluster_variance, Clustering, Linkage,
};
use crate::distance::{DenseMatrix, Dissimilarity, DistanceContext};
use crate::error::{Error, Result};
use crate::seed;
use crate::tree::{clusters_weighted_f1, per_cluster_trees, TreeTrainer};

/// Neighbors per metric offered to mutation.
pub const NEIGHBORS: usize = 10;

/// `a` dominates `b`: no worse in variance (lower is better) and F1 (higher
/// is better), strictly better in at least one.
pub fn pareto_dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.0 && a.1 >= b.1 && (a.0 < b.0 || a.1 > b.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontMember {
    pub genome: Genome,
    pub clustering: Clustering,
    pub variance: f64,
    pub f1: f64,
}

impl FrontMember {
    pub fn objectives(&self) -> (f64, f64) {
        (self.variance, self.f1)
    }
}

/// Non-dominated candidates, one per partition, sorted by variance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub members: Vec<FrontMember>,
    /// Distinct partitions evaluated while building the front.
    pub evaluated: usize,
}

impl ParetoFront {
    /// Keeps the non-dominated subset of `candidates`. Of several candidates
    /// with the same partition only the first is considered.
    pub fn from_candidates(candidates: Vec<FrontMember>) -> Self {
        let mut seen = std::collections::HashSet::new();
        let unique: Vec<FrontMember> = candidates
            .into_iter()
            .filter(|c| seen.insert(c.clustering.assignment.clone()))
            .collect();
        let evaluated = unique.len();
        let mut members: Vec<FrontMember> = unique
            .iter()
            .filter(|c| {
                !unique
                    .iter()
                    .any(|o| pareto_dominates(o.objectives(), c.objectives()))
            })
            .cloned()
            .collect();
        members.sort_by(|a, b| {
            a.variance
                .total_cmp(&b.variance)
                .then(b.f1.total_cmp(&a.f1))
                .then(a.clustering.k.cmp(&b.clustering.k))
        });
        Self { members, evaluated }
    }

    /// Index of the member closest to the utopia point (lowest variance,
    /// highest F1), with both objectives scaled to the front's range.
    pub fn utopia_choice(&self) -> Option<usize> {
        let (vmin, vmax) = self
            .members
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| {
                (lo.min(m.variance), hi.max(m.variance))
            });
        let (fmin, fmax) = self
            .members
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| {
                (lo.min(m.f1), hi.max(m.f1))
            });
        let scale = |x: f64, lo: f64, hi: f64| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 };
        self.members
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let v = scale(m.variance, vmin, vmax);
                let f = 1.0 - scale(m.f1, fmin, fmax);
                (i, v * v + f * f)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
    }

    /// `variance,weighted_f1,k,genome_hash` per member.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["variance", "weighted_f1", "k", "genome_hash"])?;
        for m in &self.members {
            w.write_record([
                m.variance.to_string(),
                m.f1.to_string(),
                m.clustering.k.to_string(),
                format!("{:016x}", m.genome.hash64()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolveParams {
    pub population: usize,
    pub generations: usize,
    pub mutation_rate: f64,
    pub max_depth: Option<usize>,
    /// `k` grid for the elbow choice of the seed genomes.
    pub k_min: usize,
    pub k_max: usize,
    pub linkage: Linkage,
    pub seed: u64,
}

impl Default for EvolveParams {
    fn default() -> Self {
        Self {
            population: 20,
            generations: 30,
            mutation_rate: 0.05,
            max_depth: Some(6),
            k_min: 3,
            k_max: 11,
            linkage: Linkage::Average,
            seed: 7,
        }
    }
}

/// What fitness is measured on.
pub struct FitnessData<'a> {
    pub ctx: &'a DistanceContext,
    pub series: &'a [Vec<f64>],
    pub features: &'a [Vec<bool>],
    pub weights: &'a [f64],
    pub trainer: &'a dyn TreeTrainer,
}

fn elbow_clustering(dist: &DenseMatrix, p: &EvolveParams, tag: &str) -> Result<Clustering> {
    let k_max = p.k_max.min(dist.len());
    let mut curve = BTreeMap::new();
    let mut found = BTreeMap::new();
    for k in p.k_min..=k_max {
        let c = hierarchical_cluster(dist, k, p.linkage)?;
        curve.insert(k, distortion(&c, dist));
        found.insert(k, c);
    }
    let k = if curve.len() >= 3 {
        elbow_k(&curve)?
    } else {
        *curve.keys().next().ok_or(Error::Empty("seed k grid"))?
    };
    let mut c = found.remove(&k).ok_or(Error::Empty("seed clustering"))?;
    c.method_tag = tag.to_string();
    Ok(c)
}

fn fitness(g: &Genome, data: &FitnessData, max_depth: Option<usize>) -> Result<FrontMember> {
    let clustering = decode(g, &data.ctx.a_matrix, "evolve")?;
    let variance = within_cluster_variance(&clustering, data.series)?;
    let trees = per_cluster_trees(
        data.trainer,
        data.features,
        data.weights,
        &clustering,
        max_depth,
    )?;
    let f1 = clusters_weighted_f1(&trees, &clustering, data.weights);
    Ok(FrontMember {
        genome: g.clone(),
        clustering,
        variance,
        f1,
    })
}

/// Evolutionary search for partitions trading within-cluster variance
/// against the weighted F1 of per-cluster explanation trees.
///
/// Generation 0 holds two seed genomes, from trend-only and feature-only
/// hierarchical clusterings at their elbow `k`. Each later generation is
/// `population` children, each made by crossing two uniformly drawn members
/// of the previous generation and mutating the result. Every child draws its
/// randomness from its own derived seed. The front is taken over every
/// genome ever evaluated.
pub fn evolve_pareto(data: &FitnessData, p: &EvolveParams) -> Result<ParetoFront> {
    if p.population < 2 {
        return Err(Error::param("population", "must be at least 2"));
    }
    if !(0.0..=1.0).contains(&p.mutation_rate) {
        return Err(Error::param("mutation_rate", "must lie in [0, 1]"));
    }
    let n = data.ctx.len();
    if data.series.len() != n || data.features.len() != n || data.weights.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: data
                .series
                .len()
                .min(data.features.len())
                .min(data.weights.len()),
        });
    }
    let seeds = [
        elbow_clustering(&data.ctx.a_matrix, p, "trend-seed")?,
        elbow_clustering(&data.ctx.e_matrix, p, "feature-seed")?,
    ];
    let neighbors = neighbor_lists(&[&data.ctx.a_matrix, &data.ctx.e_matrix], NEIGHBORS);

    let mut cache: HashMap<Vec<usize>, Arc<FrontMember>> = HashMap::new();
    let mut order: Vec<Arc<FrontMember>> = Vec::new();
    let mut score = |genomes: &[Genome]| -> Result<()> {
        let fresh: Vec<&Genome> = {
            let mut batch = std::collections::HashSet::new();
            genomes
                .iter()
                .filter(|g| {
                    let l = g.labels();
                    !cache.contains_key(&l) && batch.insert(l)
                })
                .collect()
        };
        let scored: Vec<FrontMember> = fresh
            .par_iter()
            .map(|g| fitness(g, data, p.max_depth))
            .collect::<Result<_>>()?;
        for m in scored {
            let m = Arc::new(m);
            cache.insert(m.genome.labels(), m.clone());
            order.push(m);
        }
        Ok(())
    };

    let mut generation: Vec<Genome> = seeds
        .iter()
        .map(|c| encode(c, &data.ctx.a_matrix))
        .collect::<Result<_>>()?;
    score(&generation)?;
    for gen in 0..p.generations {
        let next: Vec<Genome> = (0..p.population)
            .into_par_iter()
            .map(|i| {
                let s = seed::derive_indexed(p.seed, &[gen as u64, i as u64]);
                let mut rng = seed::rng(s);
                let a = &generation[rng.random_range(0..generation.len())];
                let b = &generation[rng.random_range(0..generation.len())];
                let child = crossover(a, b, seed::derive_indexed(s, &[1]))?;
                mutate(
                    &child,
                    p.mutation_rate,
                    &neighbors,
                    seed::derive_indexed(s, &[2]),
                )
            })
            .collect::<Result<_>>()?;
        score(&next)?;
        generation = next;
    }
    Ok(ParetoFront::from_candidates(
        order.iter().map(|m| (**m).clone()).collect(),
    ))
}
