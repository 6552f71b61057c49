//! Decision trees that explain a clustering from one-hot features.

mod cart;
mod dot;
mod metrics;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::Clustering;
use crate::error::{Error, Result};

pub use cart::{train_tree, CartTrainer};
pub use dot::export_dot;
pub use metrics::{evaluate, ClassMetrics, TreeMetrics, LOW_PRECISION};

/// Split threshold on binary features: `x <= 0.5` goes left.
pub const THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreeMode {
    /// One tree classifying each demographic into its cluster id.
    #[default]
    MultiClass,
    /// One tree per cluster predicting membership (class 1) or not (class 0).
    BinaryPerCluster,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    /// Split feature for internal nodes, `None` for leaves.
    pub feature: Option<usize>,
    pub threshold: f64,
    pub left: Option<usize>,
    pub right: Option<usize>,
    /// Majority class by summed weight (lowest class on ties).
    pub prediction: usize,
    /// Summed weights per class of the rows reaching this node.
    pub class_weights: Vec<f64>,
    pub samples: usize,
    pub depth: usize,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.feature.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainTree {
    /// Node 0 is the root.
    pub nodes: Vec<TreeNode>,
    pub mode: TreeMode,
    pub n_classes: usize,
    pub node_count: usize,
    pub depth: usize,
    pub metrics: TreeMetrics,
    /// Set when some impure node had no usable split (identical feature rows
    /// with different labels); that node became a majority leaf.
    pub degenerate: bool,
}

impl ExplainTree {
    pub fn predict(&self, row: &[bool]) -> usize {
        let mut i = 0;
        loop {
            let node = &self.nodes[i];
            match (node.feature, node.left, node.right) {
                (Some(f), Some(l), Some(r)) => i = if row[f] { r } else { l },
                _ => return node.prediction,
            }
        }
    }

    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Number of nodes reachable from the root.
pub fn count_nodes(tree: &ExplainTree) -> usize {
    if tree.nodes.is_empty() {
        return 0;
    }
    let mut stack = vec![0usize];
    let mut count = 0;
    while let Some(i) = stack.pop() {
        count += 1;
        let node = &tree.nodes[i];
        stack.extend(node.left);
        stack.extend(node.right);
    }
    count
}

/// A tree construction strategy.
pub trait TreeTrainer: Send + Sync {
    fn name(&self) -> &'static str;

    fn train(
        &self,
        features: &[Vec<bool>],
        labels: &[usize],
        weights: &[f64],
        max_depth: Option<usize>,
        mode: TreeMode,
    ) -> Result<ExplainTree>;
}

impl fmt::Debug for dyn TreeTrainer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TreeTrainer({})", self.name())
    }
}

type TrainerCtor = fn() -> Arc<dyn TreeTrainer>;

/// Name-keyed registry of tree trainers.
pub struct TrainerRegistry {
    entries: BTreeMap<&'static str, TrainerCtor>,
}

impl Default for TrainerRegistry {
    fn default() -> Self {
        let mut r = Self {
            entries: BTreeMap::new(),
        };
        r.register("cart", || Arc::new(CartTrainer));
        r
    }
}

impl TrainerRegistry {
    pub fn register(&mut self, name: &'static str, ctor: TrainerCtor) {
        self.entries.insert(name, ctor);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn create(&self, name: &str) -> Result<Arc<dyn TreeTrainer>> {
        self.entries
            .get(name)
            .map(|ctor| ctor())
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "tree trainer",
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }
}

/// One membership tree per cluster; trees train in parallel.
pub fn per_cluster_trees(
    trainer: &dyn TreeTrainer,
    features: &[Vec<bool>],
    weights: &[f64],
    clustering: &Clustering,
    max_depth: Option<usize>,
) -> Result<Vec<ExplainTree>> {
    (0..clustering.k)
        .into_par_iter()
        .map(|c| {
            let labels: Vec<usize> = clustering
                .assignment
                .iter()
                .map(|&a| usize::from(a == c))
                .collect();
            trainer.train(
                features,
                &labels,
                weights,
                max_depth,
                TreeMode::BinaryPerCluster,
            )
        })
        .collect()
}

/// Average of the per-cluster trees' positive-class F1, each weighted by the
/// summed demographic weight of its cluster.
pub fn clusters_weighted_f1(
    trees: &[ExplainTree],
    clustering: &Clustering,
    weights: &[f64],
) -> f64 {
    let mut cluster_weight = vec![0.0; clustering.k];
    for (p, &c) in clustering.assignment.iter().enumerate() {
        cluster_weight[c] += weights[p];
    }
    let total: f64 = cluster_weight.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    trees
        .iter()
        .zip(&cluster_weight)
        .map(|(t, w)| w * t.metrics.positive_f1())
        .sum::<f64>()
        / total
}
