//! Run configuration, read from TOML.
//!
//! Every section and key is optional; missing values take the defaults of
//! [`RunConfig::default`]. [`RunConfig::validate`] reports every problem at
//! once.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clustering::{Linkage, PamInit};
use crate::dataset::{ColumnSchema, SyntheticParams};
use crate::distance::{AccuracyMetric, AlphaOrientation, ExplainMetric};
use crate::error::{Error, Result};
use crate::evolve::{LexOrder, DEFAULT_SWEEP};
use crate::optimizer::SearchSettings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// CSV relation to load; synthetic data is generated when absent.
    pub path: Option<PathBuf>,
    pub schema: Option<ColumnSchema>,
    /// Attributes whose value combinations form the demographics; defaults to
    /// all schema features.
    pub combo_features: Option<Vec<String>>,
    pub min_weight_fraction: f64,
    /// Moving-average window in days; 1 disables smoothing.
    pub smoothing_window: usize,
    pub synthetic: SyntheticParams,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            path: None,
            schema: None,
            combo_features: None,
            min_weight_fraction: 0.0,
            smoothing_window: 1,
            synthetic: SyntheticParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub accuracy: AccuracyMetric,
    pub explain: ExplainMetric,
    pub orientation: AlphaOrientation,
    pub normalize_series: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            accuracy: AccuracyMetric::Dtw,
            explain: ExplainMetric::Jaccard,
            orientation: AlphaOrientation::default(),
            normalize_series: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClustererConfig {
    pub name: String,
    pub linkage: Linkage,
    pub init: PamInit,
}

impl Default for ClustererConfig {
    fn default() -> Self {
        Self {
            name: "pam".into(),
            linkage: Linkage::Average,
            init: PamInit::Build,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeConfig {
    pub trainer: String,
    /// Depth cap of the multi-class tree behind `N`; unlimited when absent.
    pub max_depth: Option<usize>,
    /// Depth cap of per-cluster membership trees.
    pub per_cluster_depth: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            trainer: "cart".into(),
            max_depth: None,
            per_cluster_depth: 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    pub population: usize,
    pub generations: usize,
    pub mutation_rate: f64,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            population: 20,
            generations: 30,
            mutation_rate: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexConfig {
    pub order: LexOrder,
    pub k1: usize,
    pub k2: usize,
}

impl Default for LexConfig {
    fn default() -> Self {
        Self {
            order: LexOrder::TsThenFeature,
            k1: 3,
            k2: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub alphas: Vec<f64>,
    pub k: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            alphas: DEFAULT_SWEEP.to_vec(),
            k: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: String,
    /// Root seed; every component derives its own seed from it.
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Parallel worker cap; 0 uses every core.
    pub workers: usize,
    pub data: DataConfig,
    pub metrics: MetricsConfig,
    pub clusterer: ClustererConfig,
    pub search: SearchSettings,
    pub tree: TreeConfig,
    pub evolve: EvolveConfig,
    pub lexicographic: LexConfig,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            method: "xclusters".into(),
            seed: 7,
            output_dir: PathBuf::from("xclusters-out"),
            workers: 0,
            data: DataConfig::default(),
            metrics: MetricsConfig::default(),
            clusterer: ClustererConfig::default(),
            search: SearchSettings::default(),
            tree: TreeConfig::default(),
            evolve: EvolveConfig::default(),
            lexicographic: LexConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    /// All problems that can be found without loading data. The method and
    /// strategy names are checked against `known_*`.
    pub fn validate(
        &self,
        known_methods: &[&str],
        known_clusterers: &[&str],
        known_trainers: &[&str],
    ) -> Result<()> {
        let mut errs = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                errs.push(msg);
            }
        };
        check(
            known_methods.contains(&self.method.as_str()),
            format!(
                "method '{}' is not one of: {}",
                self.method,
                known_methods.join(", ")
            ),
        );
        check(
            known_clusterers.contains(&self.clusterer.name.as_str()),
            format!(
                "clusterer '{}' is not one of: {}",
                self.clusterer.name,
                known_clusterers.join(", ")
            ),
        );
        check(
            known_trainers.contains(&self.tree.trainer.as_str()),
            format!(
                "tree trainer '{}' is not one of: {}",
                self.tree.trainer,
                known_trainers.join(", ")
            ),
        );
        let s = &self.search;
        check(
            s.k_min >= 1,
            format!("search.k_min = {} must be at least 1", s.k_min),
        );
        check(
            s.k_max >= s.k_min,
            format!("search k range [{}, {}] is empty", s.k_min, s.k_max),
        );
        check(
            s.lambda >= 0.0 && s.lambda.is_finite(),
            format!("search.lambda = {} must be finite and >= 0", s.lambda),
        );
        check(
            s.epsilon_b >= 0.0 && s.epsilon_b.is_finite(),
            format!("search.epsilon_b = {} must be finite and >= 0", s.epsilon_b),
        );
        check(
            s.delta_alpha > 0.0 && s.delta_alpha <= 1.0,
            format!("search.delta_alpha = {} must lie in (0, 1]", s.delta_alpha),
        );
        check(
            s.alpha_step > 0.0 && s.alpha_step <= 1.0,
            format!("search.alpha_step = {} must lie in (0, 1]", s.alpha_step),
        );
        if self.method == "two-step" {
            check(
                s.k_max >= s.k_min + 2,
                "two-step needs at least 3 values of k".to_string(),
            );
        }
        let d = &self.data;
        check(
            (0.0..=1.0).contains(&d.min_weight_fraction),
            format!(
                "data.min_weight_fraction = {} must lie in [0, 1]",
                d.min_weight_fraction
            ),
        );
        check(
            d.smoothing_window >= 1,
            "data.smoothing_window must be at least 1".into(),
        );
        if d.path.is_some() {
            check(
                d.schema.is_some(),
                "data.path is set but data.schema is missing".into(),
            );
        } else {
            let p = &d.synthetic;
            check(
                p.n_groups >= 2,
                "data.synthetic.n_groups must be at least 2".into(),
            );
            check(
                p.per_group >= 2,
                "data.synthetic.per_group must be at least 2".into(),
            );
            check(
                p.length >= 4,
                "data.synthetic.length must be at least 4".into(),
            );
            check(
                p.noise_sd >= 0.0 && p.noise_sd.is_finite(),
                "data.synthetic.noise_sd must be >= 0".into(),
            );
            check(
                (0.0..=1.0).contains(&p.feature_alignment),
                "data.synthetic.feature_alignment must lie in [0, 1]".into(),
            );
            let n = p.n_groups * p.per_group;
            check(
                s.k_max <= n,
                format!(
                    "search.k_max = {} exceeds the {n} synthetic demographics",
                    s.k_max
                ),
            );
        }
        let e = &self.evolve;
        check(
            e.population >= 2,
            "evolve.population must be at least 2".into(),
        );
        check(
            (0.0..=1.0).contains(&e.mutation_rate),
            "evolve.mutation_rate must lie in [0, 1]".into(),
        );
        check(
            self.lexicographic.k1 >= 1 && self.lexicographic.k2 >= 1,
            "lexicographic.k1 and k2 must be at least 1".into(),
        );
        check(
            !self.sweep.alphas.is_empty(),
            "sweep.alphas must not be empty".into(),
        );
        check(
            self.sweep.alphas.iter().all(|a| (0.0..=1.0).contains(a)),
            "sweep.alphas must lie in [0, 1]".into(),
        );
        check(self.sweep.k >= 1, "sweep.k must be at least 1".into());
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}
