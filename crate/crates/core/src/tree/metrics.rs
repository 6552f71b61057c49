use serde::{Deserialize, Serialize};

use super::{ExplainTree, TreeMode};
use crate::error::{Error, Result};

/// Classes whose precision falls below this are listed in
/// [`TreeMetrics::low_precision`].
pub const LOW_PRECISION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Summed weight of rows whose true label is this class.
    pub support: f64,
}

/// Weight-weighted confusion statistics of a tree on its training rows.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TreeMetrics {
    pub classes: Vec<ClassMetrics>,
    pub weighted_f1: f64,
    pub accuracy: f64,
    /// Classes with support whose precision is below [`LOW_PRECISION`].
    pub low_precision: Vec<usize>,
    pub mode: TreeMode,
}

impl TreeMetrics {
    /// F1 of class 1 for membership trees, weighted F1 otherwise.
    pub fn positive_f1(&self) -> f64 {
        match self.mode {
            TreeMode::BinaryPerCluster => self.classes.get(1).map_or(0.0, |c| c.f1),
            TreeMode::MultiClass => self.weighted_f1,
        }
    }

    pub fn is_flagged(&self) -> bool {
        !self.low_precision.is_empty()
    }
}

/// Scores `tree` on the given rows; precision and recall of a class with no
/// predicted (resp. true) weight are 0.
pub fn evaluate(
    tree: &ExplainTree,
    features: &[Vec<bool>],
    labels: &[usize],
    weights: &[f64],
) -> Result<TreeMetrics> {
    if features.len() != labels.len() || labels.len() != weights.len() {
        return Err(Error::LengthMismatch {
            left: features.len(),
            right: labels.len().min(weights.len()),
        });
    }
    let classes = tree.n_classes.max(labels.iter().max().map_or(0, |m| m + 1));
    let mut true_w = vec![0.0; classes];
    let mut pred_w = vec![0.0; classes];
    let mut hit_w = vec![0.0; classes];
    for ((row, &y), &w) in features.iter().zip(labels).zip(weights) {
        let p = tree.predict(row);
        true_w[y] += w;
        if p < classes {
            pred_w[p] += w;
        }
        if p == y {
            hit_w[y] += w;
        }
    }
    let total: f64 = true_w.iter().sum();
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    let per_class: Vec<ClassMetrics> = (0..classes)
        .map(|c| {
            let precision = ratio(hit_w[c], pred_w[c]);
            let recall = ratio(hit_w[c], true_w[c]);
            ClassMetrics {
                class: c,
                precision,
                recall,
                f1: ratio(2.0 * precision * recall, precision + recall),
                support: true_w[c],
            }
        })
        .collect();
    let weighted_f1 = ratio(per_class.iter().map(|c| c.f1 * c.support).sum(), total);
    let low_precision = per_class
        .iter()
        .filter(|c| c.support > 0.0 && c.precision < LOW_PRECISION)
        .filter(|c| tree.mode == TreeMode::MultiClass || c.class == 1)
        .map(|c| c.class)
        .collect();
    Ok(TreeMetrics {
        classes: per_class,
        weighted_f1,
        accuracy: ratio(hit_w.iter().sum(), total),
        low_precision,
        mode: tree.mode,
    })
}
