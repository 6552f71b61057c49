//! End-to-end runs: data preparation, the method registry and the outcome
//! every method reports.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::clustering::{
    within_cluster_variance, Clusterer, ClustererOptions, ClustererRegistry, Clustering,
};
use crate::config::RunConfig;
use crate::dataset::{aggregate_demographics, gen_synthetic, load_temporal_relation, Dataset};
use crate::distance::{build_context, DistanceContext};
use crate::error::{Error, Result};
use crate::evaluator::{trend_distortion, ClusterPipeline, Evaluator};
use crate::evolve::{
    combined_sweep, evolve_pareto, lexicographic, EvolveParams, FitnessData, FrontMember, Genome,
    ParetoFront,
};
use crate::monotonicity::{monotonicity_report, MonotonicityReport};
use crate::optimizer::{grid_search, two_step, xclusters_optimize, OptimizerReport};
use crate::seed;
use crate::tree::{
    clusters_weighted_f1, per_cluster_trees, ExplainTree, TrainerRegistry, TreeMode, TreeTrainer,
};

/// Data and strategies shared by every method of one run.
pub struct RunContext {
    pub config: RunConfig,
    /// The dataset as clustered: smoothed and, if configured, normalized.
    pub dataset: Dataset,
    /// Ground-truth groups of synthetic data.
    pub groups: Option<Vec<usize>>,
    pub ctx: Arc<DistanceContext>,
    pub clusterer: Arc<dyn Clusterer>,
    pub trainer: Arc<dyn TreeTrainer>,
    pub evaluator: Evaluator,
}

impl RunContext {
    pub fn prepare(config: &RunConfig) -> Result<Self> {
        let (raw, groups) = load_dataset(config)?;
        let mut dataset = raw.smoothed(config.data.smoothing_window)?;
        if config.metrics.normalize_series {
            dataset = dataset.min_max_normalized();
        }
        if config.search.k_max > dataset.len() {
            return Err(Error::param(
                "search.k_max",
                format!(
                    "{} exceeds the {} demographics",
                    config.search.k_max,
                    dataset.len()
                ),
            ));
        }
        let ctx = Arc::new(
            build_context(&dataset, config.metrics.accuracy, config.metrics.explain)?
                .with_orientation(config.metrics.orientation),
        );
        let clusterer = ClustererRegistry::default().create(
            &config.clusterer.name,
            &ClustererOptions {
                linkage: config.clusterer.linkage,
                init: config.clusterer.init,
            },
        )?;
        let trainer = TrainerRegistry::default().create(&config.tree.trainer)?;
        let evaluator = Evaluator::new(ClusterPipeline {
            ctx: ctx.clone(),
            features: Arc::new(dataset.features()),
            weights: Arc::new(dataset.weights()),
            clusterer: clusterer.clone(),
            trainer: trainer.clone(),
            seed: seed::derive(config.seed, "clusterer"),
            max_depth: config.tree.max_depth,
        });
        Ok(Self {
            config: config.clone(),
            dataset,
            groups,
            ctx,
            clusterer,
            trainer,
            evaluator,
        })
    }

    fn fitness_data<'a>(
        &'a self,
        series: &'a [Vec<f64>],
        features: &'a [Vec<bool>],
        weights: &'a [f64],
    ) -> FitnessData<'a> {
        FitnessData {
            ctx: &self.ctx,
            series,
            features,
            weights,
            trainer: self.trainer.as_ref(),
        }
    }

    /// `(variance, weighted F1)` of a clustering, as scored by the evolutionary
    /// search.
    pub fn score(&self, clustering: &Clustering) -> Result<(f64, f64)> {
        let (features, weights) = (self.dataset.features(), self.dataset.weights());
        let variance = within_cluster_variance(clustering, &self.dataset.series())?;
        let trees = per_cluster_trees(
            self.trainer.as_ref(),
            &features,
            &weights,
            clustering,
            Some(self.config.tree.per_cluster_depth),
        )?;
        Ok((variance, clusters_weighted_f1(&trees, clustering, &weights)))
    }
}

/// Reads the configured relation, or generates the synthetic dataset.
pub fn load_dataset(config: &RunConfig) -> Result<(Dataset, Option<Vec<usize>>)> {
    let d = &config.data;
    match &d.path {
        Some(path) => {
            let schema = d.schema.as_ref().ok_or_else(|| {
                Error::Config(vec!["data.path is set but data.schema is missing".into()])
            })?;
            let loaded = load_temporal_relation(path, schema)?;
            let combo = d
                .combo_features
                .clone()
                .unwrap_or_else(|| schema.features.clone());
            Ok((
                aggregate_demographics(&loaded.records, &combo, d.min_weight_fraction)?,
                None,
            ))
        }
        None => {
            let s = gen_synthetic(&d.synthetic)?;
            Ok((s.dataset, Some(s.groups)))
        }
    }
}

/// What a method hands back for reporting.
#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub method: String,
    pub clustering: Clustering,
    /// Multi-class tree explaining `clustering`.
    pub tree: ExplainTree,
    pub report: Option<OptimizerReport>,
    pub front: Option<ParetoFront>,
    /// Every clustering of a sweep, with its blend weight.
    pub alternatives: Vec<Clustering>,
    /// Method-specific facts for the manifest.
    pub details: BTreeMap<String, serde_json::Value>,
    /// Whether the evaluation cache is worth writing out.
    pub write_cache: bool,
}

/// Summary numbers written to `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub k: usize,
    pub alpha: f64,
    pub d_raw: f64,
    pub n_raw: f64,
    pub d: f64,
    pub n: f64,
    pub lambda: f64,
    pub objective: f64,
    pub within_cluster_variance: f64,
    pub per_cluster_weighted_f1: f64,
    pub tree_accuracy: f64,
    pub tree_weighted_f1: f64,
    pub tree_depth: usize,
    pub tree_degenerate: bool,
    pub low_precision_classes: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matches_ground_truth: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evaluations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_hits: Option<usize>,
}

impl RunMetrics {
    pub fn compute(rc: &RunContext, outcome: &MethodOutcome) -> Result<Self> {
        let c = &outcome.clustering;
        // methods that never consulted the evaluator still report on its scale
        let norm = rc
            .evaluator
            .init_normalization(rc.config.search.k_min, rc.config.search.k_max)?;
        let lambda = rc.config.search.lambda;
        let d_raw = trend_distortion(c, &rc.ctx.a_matrix)?;
        let n_raw = outcome.tree.node_count as f64;
        let (d, n) = (d_raw / norm.d_ref, n_raw / norm.n_ref);
        let (variance, f1) = rc.score(c)?;
        let report = outcome.report.as_ref();
        Ok(Self {
            k: c.k,
            alpha: c.alpha,
            d_raw,
            n_raw,
            d,
            n,
            lambda,
            objective: d + lambda * n,
            within_cluster_variance: variance,
            per_cluster_weighted_f1: f1,
            tree_accuracy: outcome.tree.metrics.accuracy,
            tree_weighted_f1: outcome.tree.metrics.weighted_f1,
            tree_depth: outcome.tree.depth,
            tree_degenerate: outcome.tree.degenerate,
            low_precision_classes: outcome.tree.metrics.low_precision.clone(),
            matches_ground_truth: rc
                .groups
                .as_ref()
                .map(|g| canonical(g) == canonical(&c.assignment)),
            evaluations: report.map(|r| r.evaluations),
            cache_hits: report.map(|_| rc.evaluator.stats().hits),
        })
    }
}

fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map = BTreeMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// One way of choosing a clustering.
pub trait Method: Send + Sync {
    fn name(&self) -> &'static str;

    fn description(&self) -> &'static str;

    fn run(&self, rc: &RunContext) -> Result<MethodOutcome>;
}

fn explain(rc: &RunContext, clustering: &Clustering) -> Result<ExplainTree> {
    rc.trainer.train(
        &rc.dataset.features(),
        &clustering.assignment,
        &rc.dataset.weights(),
        rc.config.tree.max_depth,
        TreeMode::MultiClass,
    )
}

fn from_report(rc: &RunContext, report: OptimizerReport) -> Result<MethodOutcome> {
    let best = &report.best;
    let clustering = best
        .clustering
        .as_deref()
        .cloned()
        .ok_or(Error::Empty("optimizer result carries no clustering"))?;
    let tree = match &best.tree {
        Some(t) => (**t).clone(),
        None => explain(rc, &clustering)?,
    };
    let mut details = BTreeMap::new();
    if let Some(k) = report.elbow_k {
        details.insert("elbow_k".into(), k.into());
    }
    Ok(MethodOutcome {
        method: report.method.clone(),
        clustering,
        tree,
        report: Some(report),
        front: None,
        alternatives: Vec::new(),
        details,
        write_cache: true,
    })
}

struct XClustersMethod;

impl Method for XClustersMethod {
    fn name(&self) -> &'static str {
        "xclusters"
    }
    fn description(&self) -> &'static str {
        "branch-and-bound over (k, alpha) blocks"
    }
    fn run(&self, rc: &RunContext) -> Result<MethodOutcome> {
        from_report(rc, xclusters_optimize(&rc.evaluator, &rc.config.search)?)
    }
}

struct GridMethod;

impl Method for GridMethod {
    fn name(&self) -> &'static str {
        "grid"
    }
    fn description(&self) -> &'static str {
        "exhaustive scan of the k grid times the alpha grid"
    }
    fn run(&self, rc: &RunContext) -> Result<MethodOutcome> {
        from_report(rc, grid_search(&rc.evaluator, &rc.config.search)?)
    }
}

struct TwoStepMethod;

impl Method for TwoStepMethod {
    fn name(&self) -> &'static str {
        "two-step"
    }
    fn description(&self) -> &'static str {
        "trend-only clustering at the elbow k, then one tree"
    }
    fn run(&self, rc: &RunContext) -> Result<MethodOutcome> {
        let mut out = from_report(rc, two_step(&rc.evaluator, &rc.config.search)?)?;
        out.write_cache = false;
        Ok(out)
    }
}

fn pick_from_front(rc: &RunContext, method: &str, front: ParetoFront) -> Result<MethodOutcome> {
    let i = front.utopia_choice().ok_or(Error::Empty("front"))?;
    let clustering = front.members[i].clustering.clone();
    let tree = explain(rc, &clustering)?;
    let mut details = BTreeMap::new();
    details.insert("front_size".into(), front.members.len().into());
    details.insert("front_choice".into(), i.into());
    details.insert("evaluated_partitions".into(), front.evaluated.into());
    Ok(MethodOutcome {
        method: method.to_string(),
        clustering,
        tree,
        report: None,
        front: Some(front),
        alternatives: Vec::new(),
        details,
        write_cache: false,
    })
}

struct EvolveMethod;

impl Method for EvolveMethod {
    fn name(&self) -> &'static str {
        "evolve"
    }
    fn description(&self) -> &'static str {
        "evolutionary Pareto search over variance and explanation F1"
    }
    fn run(&self, rc: &RunContext) -> Result<MethodOutcome> {
        let c = &rc.config;
        let params = EvolveParams {
            population: c.evolve.population,
            generations: c.evolve.generations,
            mutation_rate: c.evolve.mutation_rate,
            max_depth: Some(c.tree.per_cluster_depth),
            k_min: c.search.k_min,
            k_max: c.search.k_max,
            linkage: c.clusterer.linkage,
            seed: seed::derive(c.seed, "evolve"),
        };
        let (series, features, weights) = (
            rc.dataset.series(),
            rc.dataset.features(),
            rc.dataset.weights(),
        );
        let front = evolve_pareto(&rc.fitness_data(&series, &features, &weights), &params)?;
        pick_from_front(rc, "evolve", front)
    }
}

struct LexicographicMethod;

impl Method for LexicographicMethod {
    fn name(&self) -> &'static str {
        "lexicographic"
    }
    fn description(&self) -> &'static str {
        "cluster on one metric, then split each cluster on the other"
    }
    fn run(&self, rc: &RunContext) -> Result<MethodOutcome> {
        let l = &rc.config.lexicographic;
        let clustering = lexicographic(&rc.ctx, l.order, l.k1, l.k2, rc.config.clusterer.linkage)?;
        let tree = explain(rc, &clustering)?;
        let mut details = BTreeMap::new();
        details.insert("order".into(), serde_json::to_value(l.order)?);
        Ok(MethodOutcome {
            method: "lexicographic".into(),
            clustering,
            tree,
            report: None,
            front: None,
            alternatives: Vec::new(),
            details,
            write_cache: false,
        })
    }
}

struct SweepMethod;

impl Method for SweepMethod {
    fn name(&self) -> &'static str {
        "combined-sweep"
    }
    fn description(&self) -> &'static str {
        "hierarchical clustering at each listed alpha; the result nearest the utopia point is kept"
    }
    fn run(&self, rc: &RunContext) -> Result<MethodOutcome> {
        let s = &rc.config.sweep;
        let all = combined_sweep(&rc.ctx, &s.alphas, s.k, rc.config.clusterer.linkage)?;
        let members = all
            .iter()
            .map(|c| {
                let (variance, f1) = rc.score(c)?;
                Ok(FrontMember {
                    genome: Genome::identity(0),
                    clustering: c.clone(),
                    variance,
                    f1,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        // utopia choice over all sweep results, dominated ones included
        let candidates = ParetoFront {
            evaluated: members.len(),
            members,
        };
        let i = candidates.utopia_choice().ok_or(Error::Empty("sweep"))?;
        let clustering = all[i].clone();
        let tree = explain(rc, &clustering)?;
        let mut details = BTreeMap::new();
        details.insert("chosen_alpha".into(), clustering.alpha.into());
        Ok(MethodOutcome {
            method: "combined-sweep".into(),
            clustering,
            tree,
            report: None,
            front: None,
            alternatives: all,
            details,
            write_cache: false,
        })
    }
}

/// Name-keyed methods.
pub struct MethodRegistry {
    entries: BTreeMap<&'static str, Arc<dyn Method>>,
}

impl Default for MethodRegistry {
    fn default() -> Self {
        let mut r = Self {
            entries: BTreeMap::new(),
        };
        r.register(Arc::new(XClustersMethod));
        r.register(Arc::new(GridMethod));
        r.register(Arc::new(TwoStepMethod));
        r.register(Arc::new(EvolveMethod));
        r.register(Arc::new(LexicographicMethod));
        r.register(Arc::new(SweepMethod));
        r
    }
}

impl MethodRegistry {
    pub fn register(&mut self, method: Arc<dyn Method>) {
        self.entries.insert(method.name(), method);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn describe(&self) -> Vec<(&'static str, &'static str)> {
        self.entries
            .values()
            .map(|m| (m.name(), m.description()))
            .collect()
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Method>> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "method",
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }
}

/// Validates `config` against the built-in registries.
pub fn validate_config(config: &RunConfig) -> Result<()> {
    config.validate(
        &MethodRegistry::default().names(),
        &ClustererRegistry::default().names(),
        &TrainerRegistry::default().names(),
    )
}

/// Everything a finished run produced.
pub struct RunOutcome {
    pub context: RunContext,
    pub outcome: MethodOutcome,
    pub metrics: RunMetrics,
}

/// Validates, prepares and runs the configured method on a worker pool
/// capped at `config.workers`.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    validate_config(config)?;
    in_pool(config, || {
        let context = RunContext::prepare(config)?;
        let method = MethodRegistry::default().get(&config.method)?;
        let outcome = method.run(&context)?;
        let metrics = RunMetrics::compute(&context, &outcome)?;
        Ok(RunOutcome {
            context,
            outcome,
            metrics,
        })
    })
}

/// The four averaged monotonicity series over the configured grid.
pub fn run_monotonicity(config: &RunConfig) -> Result<MonotonicityReport> {
    validate_config(config)?;
    in_pool(config, || {
        let context = RunContext::prepare(config)?;
        monotonicity_report(&context.evaluator, &config.search)
    })
}

fn in_pool<T: Send>(config: &RunConfig, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if config.workers > 0 {
        pool = pool.num_threads(config.workers);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::InvalidInput(format!("worker pool: {e}")))?;
    pool.install(f)
}
