//! Memoized `(k, alpha) -> (D, N)` evaluation.
//!
//! An [`ObjectiveSource`] produces raw distortion and tree size in two stages
//! (cluster, then explain). The [`Evaluator`] caches both stages per quantized
//! key, normalizes against fixed references and forms `D + lambda * N`.
//! Concurrent requests for one key compute it once; the rest wait.

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{clustroid, Clusterer, Clustering};
use crate::distance::{check_alpha, Dissimilarity, DistanceContext};
use crate::error::{Error, Result};
use crate::tree::{ExplainTree, TreeMode, TreeTrainer};

/// Output of the clustering stage.
#[derive(Debug, Clone)]
pub struct ClusterStage {
    pub d_raw: f64,
    pub clustering: Option<Arc<Clustering>>,
}

/// Output of the explanation stage.
#[derive(Debug, Clone)]
pub struct ExplainStage {
    pub n_raw: f64,
    pub tree: Option<Arc<ExplainTree>>,
}

/// Anything that can produce raw `D` and `N` for a parameter pair.
pub trait ObjectiveSource: Send + Sync {
    fn name(&self) -> &str;

    fn cluster(&self, k: usize, alpha: f64) -> Result<ClusterStage>;

    fn explain(&self, k: usize, alpha: f64, stage: &ClusterStage) -> Result<ExplainStage>;
}

/// Sum over clusters of squared accuracy distances to the cluster's clustroid
/// under the accuracy distance.
pub fn trend_distortion(clustering: &Clustering, a_dist: &dyn Dissimilarity) -> Result<f64> {
    let mut total = 0.0;
    for members in clustering.members() {
        let center = clustroid(&members, a_dist)?;
        total += members
            .iter()
            .map(|&m| a_dist.get(m, center).powi(2))
            .sum::<f64>();
    }
    Ok(total)
}

/// The real pipeline: blend distances, cluster, train a multi-class tree.
pub struct ClusterPipeline {
    pub ctx: Arc<DistanceContext>,
    pub features: Arc<Vec<Vec<bool>>>,
    pub weights: Arc<Vec<f64>>,
    pub clusterer: Arc<dyn Clusterer>,
    pub trainer: Arc<dyn TreeTrainer>,
    pub seed: u64,
    pub max_depth: Option<usize>,
}

impl ObjectiveSource for ClusterPipeline {
    fn name(&self) -> &str {
        self.clusterer.name()
    }

    fn cluster(&self, k: usize, alpha: f64) -> Result<ClusterStage> {
        let blended = self.ctx.blended(alpha)?;
        let mut clustering = self.clusterer.cluster(&blended, k, self.seed)?;
        clustering.alpha = alpha;
        let d_raw = trend_distortion(&clustering, &self.ctx.a_matrix)?;
        Ok(ClusterStage {
            d_raw,
            clustering: Some(Arc::new(clustering)),
        })
    }

    fn explain(&self, _k: usize, _alpha: f64, stage: &ClusterStage) -> Result<ExplainStage> {
        let clustering = stage
            .clustering
            .as_ref()
            .ok_or(Error::Empty("cluster stage carries no clustering"))?;
        let tree = self.trainer.train(
            &self.features,
            &clustering.assignment,
            &self.weights,
            self.max_depth,
            TreeMode::MultiClass,
        )?;
        Ok(ExplainStage {
            n_raw: tree.node_count as f64,
            tree: Some(Arc::new(tree)),
        })
    }
}

type ScalarFn = Box<dyn Fn(usize, f64) -> f64 + Send + Sync>;

/// Closed-form source, used for stubs and tests.
pub struct FnSource {
    name: String,
    d: ScalarFn,
    n: ScalarFn,
}

impl FnSource {
    pub fn new(
        name: impl Into<String>,
        d: impl Fn(usize, f64) -> f64 + Send + Sync + 'static,
        n: impl Fn(usize, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            d: Box::new(d),
            n: Box::new(n),
        }
    }

    /// `D = (1 + alpha) / k`, `N = k (2 - alpha)`: decreasing/increasing in
    /// `k`, increasing/decreasing in `alpha`.
    pub fn analytic() -> Self {
        Self::new(
            "analytic-stub",
            |k, a| (1.0 + a) / k as f64,
            |k, a| k as f64 * (2.0 - a),
        )
    }

    pub fn constant(d: f64, n: f64) -> Self {
        Self::new("constant-stub", move |_, _| d, move |_, _| n)
    }
}

impl ObjectiveSource for FnSource {
    fn name(&self) -> &str {
        &self.name
    }

    fn cluster(&self, k: usize, alpha: f64) -> Result<ClusterStage> {
        Ok(ClusterStage {
            d_raw: (self.d)(k, alpha),
            clustering: None,
        })
    }

    fn explain(&self, k: usize, alpha: f64, _stage: &ClusterStage) -> Result<ExplainStage> {
        Ok(ExplainStage {
            n_raw: (self.n)(k, alpha),
            tree: None,
        })
    }
}

/// One scored parameter pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Evaluation {
    pub k: usize,
    pub alpha: f64,
    pub d_raw: f64,
    pub n_raw: f64,
    pub d: f64,
    pub n: f64,
    pub lambda: f64,
    pub objective: f64,
    #[serde(skip)]
    pub clustering: Option<Arc<Clustering>>,
    #[serde(skip)]
    pub tree: Option<Arc<ExplainTree>>,
}

impl PartialEq for Evaluation {
    fn eq(&self, o: &Self) -> bool {
        self.k == o.k
            && self.alpha.to_bits() == o.alpha.to_bits()
            && self.d_raw.to_bits() == o.d_raw.to_bits()
            && self.n_raw.to_bits() == o.n_raw.to_bits()
            && self.d.to_bits() == o.d.to_bits()
            && self.n.to_bits() == o.n.to_bits()
            && self.objective.to_bits() == o.objective.to_bits()
            && self.clustering == o.clustering
            && self.tree == o.tree
    }
}

/// Divisors applied to raw `D` and `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub d_ref: f64,
    pub n_ref: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Self {
            d_ref: 1.0,
            n_ref: 1.0,
        }
    }
}

/// Cache key: `k` and `alpha` quantized to 1e-6.
pub type Key = (usize, i64);

pub fn cache_key(k: usize, alpha: f64) -> Key {
    (k, (alpha * 1e6).round() as i64)
}

type Resolved = (f64, f64, Arc<(f64, ClusterStage)>, Arc<(f64, ExplainStage)>);

type Slot<T> = Arc<OnceLock<std::result::Result<Arc<T>, String>>>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: usize,
    pub misses: usize,
    pub cluster_runs: usize,
    pub tree_runs: usize,
}

impl CacheStats {
    pub fn since(&self, earlier: &CacheStats) -> CacheStats {
        CacheStats {
            hits: self.hits - earlier.hits,
            misses: self.misses - earlier.misses,
            cluster_runs: self.cluster_runs - earlier.cluster_runs,
            tree_runs: self.tree_runs - earlier.tree_runs,
        }
    }
}

pub struct Evaluator {
    source: Arc<dyn ObjectiveSource>,
    clusters: Mutex<HashMap<Key, Slot<(f64, ClusterStage)>>>,
    explains: Mutex<HashMap<Key, Slot<(f64, ExplainStage)>>>,
    norm: OnceLock<Normalization>,
    hits: AtomicUsize,
    misses: AtomicUsize,
    cluster_runs: AtomicUsize,
    tree_runs: AtomicUsize,
}

impl fmt::Debug for Evaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Evaluator")
            .field("source", &self.source.name())
            .field("stats", &self.stats())
            .finish()
    }
}

fn slot<T>(map: &Mutex<HashMap<Key, Slot<T>>>, key: Key) -> Slot<T> {
    let mut guard = map.lock().unwrap_or_else(|e| e.into_inner());
    guard.entry(key).or_default().clone()
}

impl Evaluator {
    pub fn new(source: impl ObjectiveSource + 'static) -> Self {
        Self::from_arc(Arc::new(source))
    }

    pub fn from_arc(source: Arc<dyn ObjectiveSource>) -> Self {
        Self {
            source,
            clusters: Mutex::default(),
            explains: Mutex::default(),
            norm: OnceLock::new(),
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
            cluster_runs: AtomicUsize::new(0),
            tree_runs: AtomicUsize::new(0),
        }
    }

    pub fn source_name(&self) -> &str {
        self.source.name()
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::SeqCst),
            misses: self.misses.load(Ordering::SeqCst),
            cluster_runs: self.cluster_runs.load(Ordering::SeqCst),
            tree_runs: self.tree_runs.load(Ordering::SeqCst),
        }
    }

    /// References in force; identity until fixed.
    pub fn normalization(&self) -> Normalization {
        self.norm.get().copied().unwrap_or_default()
    }

    /// Fixes the references explicitly. Fails if they were already fixed to
    /// different values.
    pub fn set_normalization(&self, norm: Normalization) -> Result<Normalization> {
        let fixed = *self.norm.get_or_init(|| norm);
        if fixed != norm {
            return Err(Error::InvalidInput(
                "normalization references are already fixed for this run".into(),
            ));
        }
        Ok(fixed)
    }

    /// `D_ref` = raw `D` at `(k_min, 1)`, `N_ref` = raw `N` at `(k_max, 0)`.
    /// Both corners are fully evaluated and cached. Zero references become 1.
    pub fn init_normalization(&self, k_min: usize, k_max: usize) -> Result<Normalization> {
        if k_min < 1 || k_max < k_min {
            return Err(Error::param(
                "k range",
                format!("[{k_min}, {k_max}] is empty"),
            ));
        }
        if let Some(n) = self.norm.get() {
            return Ok(*n);
        }
        let (d, n) = rayon::join(|| self.raw(k_min, 1.0), || self.raw(k_max, 0.0));
        let (d, n) = (d?.0, n?.1);
        let fix = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                v
            } else {
                log::warn!("normalization reference {what} = {v}; using 1");
                1.0
            }
        };
        Ok(*self.norm.get_or_init(|| Normalization {
            d_ref: fix(d, "D_ref"),
            n_ref: fix(n, "N_ref"),
        }))
    }

    fn cluster_stage(&self, k: usize, alpha: f64) -> Result<Arc<(f64, ClusterStage)>> {
        check_alpha(alpha).map_err(|e| e.at(k, alpha))?;
        if k == 0 {
            return Err(Error::param("k", "must be at least 1").at(k, alpha));
        }
        let cell = slot(&self.clusters, cache_key(k, alpha));
        cell.get_or_init(|| {
            self.cluster_runs.fetch_add(1, Ordering::SeqCst);
            self.source
                .cluster(k, alpha)
                .map(|s| Arc::new((alpha, s)))
                .map_err(|e| e.to_string())
        })
        .clone()
        .map_err(|m| Error::InvalidInput(m).at(k, alpha))
    }

    fn raw(&self, k: usize, alpha: f64) -> Result<Resolved> {
        let cell = slot(&self.explains, cache_key(k, alpha));
        let mut computed = false;
        let result = cell
            .get_or_init(|| {
                computed = true;
                self.misses.fetch_add(1, Ordering::SeqCst);
                let stage = self.cluster_stage(k, alpha).map_err(|e| e.to_string())?;
                self.tree_runs.fetch_add(1, Ordering::SeqCst);
                self.source
                    .explain(k, alpha, &stage.1)
                    .map(|s| Arc::new((alpha, s)))
                    .map_err(|e| e.to_string())
            })
            .clone();
        if !computed {
            self.hits.fetch_add(1, Ordering::SeqCst);
        }
        let explain = result.map_err(|m| Error::InvalidInput(m).at(k, alpha))?;
        let cluster = self.cluster_stage(k, alpha)?;
        Ok((cluster.1.d_raw, explain.1.n_raw, cluster, explain))
    }

    /// Full evaluation of `(k, alpha)`; repeated calls are cache hits.
    pub fn evaluate(&self, k: usize, alpha: f64, lambda: f64) -> Result<Evaluation> {
        let (d_raw, n_raw, cluster, explain) = self.raw(k, alpha)?;
        let norm = self.normalization();
        let (d, n) = (d_raw / norm.d_ref, n_raw / norm.n_ref);
        Ok(Evaluation {
            k,
            // alpha of the first computation
            alpha: explain.0,
            d_raw,
            n_raw,
            d,
            n,
            lambda,
            objective: d + lambda * n,
            clustering: cluster.1.clustering.clone(),
            tree: explain.1.tree.clone(),
        })
    }

    /// Evaluates many points in parallel; results keep the input order.
    pub fn evaluate_many(&self, points: &[(usize, f64)], lambda: f64) -> Result<Vec<Evaluation>> {
        points
            .par_iter()
            .map(|&(k, a)| self.evaluate(k, a, lambda))
            .collect()
    }

    /// Normalized distortion only; no tree is trained.
    pub fn distortion(&self, k: usize, alpha: f64) -> Result<(f64, Option<Arc<Clustering>>)> {
        let stage = self.cluster_stage(k, alpha)?;
        Ok((
            stage.1.d_raw / self.normalization().d_ref,
            stage.1.clustering.clone(),
        ))
    }

    /// Every completed evaluation, ordered by `(k, alpha)`.
    pub fn cached_evaluations(&self, lambda: f64) -> Vec<Evaluation> {
        let mut keys: Vec<Key> = {
            let guard = self.explains.lock().unwrap_or_else(|e| e.into_inner());
            guard
                .iter()
                .filter(|(_, c)| matches!(c.get(), Some(Ok(_))))
                .map(|(k, _)| *k)
                .collect()
        };
        keys.sort_unstable();
        keys.into_iter()
            .filter_map(|(k, a)| self.peek(k, a, lambda))
            .collect()
    }

    fn peek(&self, k: usize, key_alpha: i64, lambda: f64) -> Option<Evaluation> {
        let explain = {
            let guard = self.explains.lock().unwrap_or_else(|e| e.into_inner());
            guard.get(&(k, key_alpha))?.get()?.clone().ok()?
        };
        let cluster = {
            let guard = self.clusters.lock().unwrap_or_else(|e| e.into_inner());
            guard.get(&(k, key_alpha))?.get()?.clone().ok()?
        };
        let norm = self.normalization();
        let (d, n) = (cluster.1.d_raw / norm.d_ref, explain.1.n_raw / norm.n_ref);
        Some(Evaluation {
            k,
            alpha: explain.0,
            d_raw: cluster.1.d_raw,
            n_raw: explain.1.n_raw,
            d,
            n,
            lambda,
            objective: d + lambda * n,
            clustering: cluster.1.clustering.clone(),
            tree: explain.1.tree.clone(),
        })
    }

    /// `k,alpha,D,N,objective` per completed evaluation.
    pub fn write_cache_csv<W: std::io::Write>(&self, lambda: f64, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "alpha", "D", "N", "objective"])?;
        for e in self.cached_evaluations(lambda) {
            w.write_record([
                e.k.to_string(),
                e.alpha.to_string(),
                e.d.to_string(),
                e.n.to_string(),
                e.objective.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicUsize;

    struct Counting {
        inner: FnSource,
        calls: Arc<AtomicUsize>,
    }

    impl ObjectiveSource for Counting {
        fn name(&self) -> &str {
            "counting"
        }
        fn cluster(&self, k: usize, a: f64) -> Result<ClusterStage> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.inner.cluster(k, a)
        }
        fn explain(&self, k: usize, a: f64, s: &ClusterStage) -> Result<ExplainStage> {
            self.inner.explain(k, a, s)
        }
    }

    #[test]
    fn second_call_is_a_hit() {
        let ev = Evaluator::new(FnSource::analytic());
        let a = ev.evaluate(3, 0.25, 1.0).unwrap();
        let before = ev.stats();
        let b = ev.evaluate(3, 0.25, 1.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(ev.stats().misses, before.misses);
        assert_eq!(ev.stats().hits, before.hits + 1);
        // float noise below the quantum maps to the same key
        let c = ev.evaluate(3, 0.25 + 1e-9, 1.0).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn lambda_zero_is_distortion_and_objective_is_linear() {
        let ev = Evaluator::new(FnSource::analytic());
        let e0 = ev.evaluate(4, 0.5, 0.0).unwrap();
        assert_eq!(e0.objective, e0.d);
        let e1 = ev.evaluate(4, 0.5, 1.0).unwrap();
        let e3 = ev.evaluate(4, 0.5, 3.0).unwrap();
        assert!(((e3.objective - e1.objective) - 2.0 * e1.n).abs() < 1e-12);
    }

    #[test]
    fn normalization_pins_the_corners() {
        let ev = Evaluator::new(FnSource::analytic());
        let norm = ev.init_normalization(3, 11).unwrap();
        assert_eq!(norm.d_ref, 2.0 / 3.0);
        assert_eq!(norm.n_ref, 22.0);
        assert_eq!(ev.stats().misses, 2);
        assert_eq!(ev.evaluate(3, 1.0, 1.0).unwrap().d, 1.0);
        assert_eq!(ev.evaluate(11, 0.0, 1.0).unwrap().n, 1.0);
        assert_eq!(ev.stats().misses, 2);
        for k in 3..=11 {
            for i in 0..=20 {
                let e = ev.evaluate(k, i as f64 / 20.0, 1.0).unwrap();
                assert!(e.d > 0.0 && e.d <= 1.0 && e.n > 0.0 && e.n <= 1.0);
            }
        }
        assert!(ev.set_normalization(Normalization::default()).is_err());
    }

    #[test]
    fn zero_references_fall_back_to_one() {
        let ev = Evaluator::new(FnSource::constant(0.0, 0.0));
        assert_eq!(
            ev.init_normalization(2, 4).unwrap(),
            Normalization::default()
        );
    }

    #[test]
    fn concurrent_requests_compute_each_key_once() {
        let calls = Arc::new(AtomicUsize::new(0));
        let ev = Evaluator::new(Counting {
            inner: FnSource::analytic(),
            calls: calls.clone(),
        });
        let points: Vec<(usize, f64)> = (0..200)
            .map(|i| (3 + i % 4, (i % 3) as f64 / 2.0))
            .collect();
        let out = ev.evaluate_many(&points, 1.0).unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 12);
        assert_eq!(ev.stats().misses, 12);
        assert_eq!(ev.stats().hits, 188);
        for (p, e) in points.iter().zip(&out) {
            assert_eq!(*e, ev.evaluate(p.0, p.1, 1.0).unwrap());
        }
        assert_eq!(ev.cached_evaluations(1.0).len(), 12);
    }

    #[test]
    fn distortion_only_skips_trees() {
        let ev = Evaluator::new(FnSource::analytic());
        ev.distortion(5, 0.0).unwrap();
        let s = ev.stats();
        assert_eq!((s.cluster_runs, s.tree_runs, s.misses), (1, 0, 0));
        ev.evaluate(5, 0.0, 1.0).unwrap();
        let s = ev.stats();
        assert_eq!((s.cluster_runs, s.tree_runs, s.misses), (1, 1, 1));
    }

    #[test]
    fn invalid_alpha_carries_context() {
        let ev = Evaluator::new(FnSource::analytic());
        let err = ev.evaluate(3, 1.5, 1.0).unwrap_err();
        assert!(matches!(err, Error::Evaluation { k: 3, .. }), "{err}");
    }

    #[test]
    fn cache_csv_lists_completed_rows() {
        let ev = Evaluator::new(FnSource::analytic());
        ev.evaluate(4, 0.5, 1.0).unwrap();
        ev.evaluate(3, 0.0, 1.0).unwrap();
        let mut buf = Vec::new();
        ev.write_cache_csv(1.0, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,alpha,D,N,objective");
        assert!(lines[1].starts_with("3,0,"));
        assert!(lines[2].starts_with("4,0.5,"));
    }
}
