use super::{metrics, ExplainTree, TreeMode, TreeNode, TreeTrainer, THRESHOLD};
use crate::error::{Error, Result};

/// Greedy CART with weighted Gini impurity over binary features.
#[derive(Debug, Clone, Copy, Default)]
pub struct CartTrainer;

impl TreeTrainer for CartTrainer {
    fn name(&self) -> &'static str {
        "cart"
    }

    fn train(
        &self,
        features: &[Vec<bool>],
        labels: &[usize],
        weights: &[f64],
        max_depth: Option<usize>,
        mode: TreeMode,
    ) -> Result<ExplainTree> {
        train_tree(features, labels, weights, max_depth, mode)
    }
}

// Gains closer than this count as ties and go to the lower feature index.
const GAIN_TIE: f64 = 1e-12;

fn gini(class_weights: &[f64]) -> f64 {
    let total: f64 = class_weights.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - class_weights
        .iter()
        .map(|w| (w / total).powi(2))
        .sum::<f64>()
}

/// Trains a tree until every leaf is pure, no split separates the rows at a
/// node, or `max_depth` is reached.
///
/// Splits with zero impurity decrease are still taken when they separate the
/// rows: an XOR labeling has zero gain at the root yet is fit exactly one
/// level down.
pub fn train_tree(
    features: &[Vec<bool>],
    labels: &[usize],
    weights: &[f64],
    max_depth: Option<usize>,
    mode: TreeMode,
) -> Result<ExplainTree> {
    let n = features.len();
    if n == 0 {
        return Err(Error::Empty("training rows"));
    }
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: labels.len(),
        });
    }
    if weights.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: weights.len(),
        });
    }
    let width = features[0].len();
    if let Some(row) = features.iter().find(|r| r.len() != width) {
        return Err(Error::LengthMismatch {
            left: width,
            right: row.len(),
        });
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidInput(format!(
            "row weight {w} must be positive"
        )));
    }
    let n_classes = match mode {
        TreeMode::BinaryPerCluster => {
            if labels.iter().any(|&l| l > 1) {
                return Err(Error::InvalidInput(
                    "binary tree labels must be 0 or 1".into(),
                ));
            }
            2
        }
        TreeMode::MultiClass => labels.iter().max().map_or(1, |m| m + 1),
    };

    let mut builder = Builder {
        features,
        labels,
        weights,
        n_classes,
        max_depth,
        nodes: Vec::new(),
        degenerate: false,
    };
    let rows: Vec<usize> = (0..n).collect();
    builder.grow(&rows, 0);

    let Builder {
        nodes, degenerate, ..
    } = builder;
    let depth = nodes.iter().map(|n| n.depth).max().unwrap_or(0);
    let mut tree = ExplainTree {
        node_count: nodes.len(),
        nodes,
        mode,
        n_classes,
        depth,
        metrics: metrics::TreeMetrics::default(),
        degenerate,
    };
    if degenerate {
        log::warn!("tree training hit identical feature rows with different labels");
    }
    tree.metrics = metrics::evaluate(&tree, features, labels, weights)?;
    Ok(tree)
}

struct Builder<'a> {
    features: &'a [Vec<bool>],
    labels: &'a [usize],
    weights: &'a [f64],
    n_classes: usize,
    max_depth: Option<usize>,
    nodes: Vec<TreeNode>,
    degenerate: bool,
}

impl Builder<'_> {
    fn class_weights(&self, rows: &[usize]) -> Vec<f64> {
        let mut w = vec![0.0; self.n_classes];
        for &r in rows {
            w[self.labels[r]] += self.weights[r];
        }
        w
    }

    /// Returns the index of the created node.
    fn grow(&mut self, rows: &[usize], depth: usize) -> usize {
        let class_weights = self.class_weights(rows);
        let prediction = majority(&class_weights);
        let id = self.nodes.len();
        self.nodes.push(TreeNode {
            feature: None,
            threshold: THRESHOLD,
            left: None,
            right: None,
            prediction,
            class_weights: class_weights.clone(),
            samples: rows.len(),
            depth,
        });

        let pure = class_weights.iter().filter(|&&w| w > 0.0).count() <= 1;
        if pure || self.max_depth.is_some_and(|d| depth >= d) {
            return id;
        }
        let Some(feature) = self.best_split(rows, &class_weights) else {
            self.degenerate = true;
            return id;
        };
        let (right, left): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| self.features[r][feature]);
        let l = self.grow(&left, depth + 1);
        let r = self.grow(&right, depth + 1);
        let node = &mut self.nodes[id];
        node.feature = Some(feature);
        node.left = Some(l);
        node.right = Some(r);
        id
    }

    /// Feature with the largest weighted Gini decrease among those that put
    /// rows on both sides.
    fn best_split(&self, rows: &[usize], parent: &[f64]) -> Option<usize> {
        let width = self.features[0].len();
        let parent_total: f64 = parent.iter().sum();
        let parent_impurity = parent_total * gini(parent);
        let mut best: Option<(usize, f64)> = None;
        let mut right = vec![0.0; self.n_classes];
        for f in 0..width {
            right.iter_mut().for_each(|w| *w = 0.0);
            let mut right_rows = 0;
            for &r in rows {
                if self.features[r][f] {
                    right[self.labels[r]] += self.weights[r];
                    right_rows += 1;
                }
            }
            if right_rows == 0 || right_rows == rows.len() {
                continue;
            }
            let left: Vec<f64> = parent.iter().zip(&right).map(|(p, r)| p - r).collect();
            let (wl, wr): (f64, f64) = (left.iter().sum(), right.iter().sum());
            let gain = parent_impurity - wl * gini(&left) - wr * gini(&right);
            if best.is_none_or(|(_, g)| gain > g + GAIN_TIE) {
                best = Some((f, gain));
            }
        }
        best.map(|(f, _)| f)
    }
}

fn majority(class_weights: &[f64]) -> usize {
    let mut best = 0;
    for (c, &w) in class_weights.iter().enumerate() {
        if w > class_weights[best] {
            best = c;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::count_nodes;
    use proptest::prelude::*;

    fn bits(rows: &[&[u8]]) -> Vec<Vec<bool>> {
        rows.iter()
            .map(|r| r.iter().map(|&b| b == 1).collect())
            .collect()
    }

    /// Weighted Gini decrease of splitting `rows` on `f`, computed from
    /// scratch; `None` when the split leaves one side empty.
    fn oracle_gain(
        x: &[Vec<bool>],
        y: &[usize],
        w: &[f64],
        rows: &[usize],
        f: usize,
    ) -> Option<f64> {
        let imp = |side: &[usize]| -> f64 {
            let total: f64 = side.iter().map(|&r| w[r]).sum();
            let classes = y.iter().max().unwrap() + 1;
            let mut g = 1.0;
            for c in 0..classes {
                let wc: f64 = side.iter().filter(|&&r| y[r] == c).map(|&r| w[r]).sum();
                g -= (wc / total).powi(2);
            }
            total * g
        };
        let (r, l): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| x[r][f]);
        if r.is_empty() || l.is_empty() {
            return None;
        }
        Some(imp(rows) - imp(&l) - imp(&r))
    }

    #[test]
    fn single_determining_feature_gives_three_nodes() {
        let x = bits(&[
            &[0, 1, 0, 0, 1],
            &[1, 0, 1, 0, 0],
            &[0, 0, 0, 1, 1],
            &[1, 1, 1, 1, 0],
            &[0, 1, 1, 0, 1],
        ]);
        let y: Vec<usize> = x.iter().map(|r| usize::from(r[3])).collect();
        let w = vec![1.0, 2.0, 1.5, 1.0, 3.0];
        let t = train_tree(&x, &y, &w, None, TreeMode::MultiClass).unwrap();
        assert_eq!(t.node_count, 3);
        assert_eq!(t.nodes[0].feature, Some(3));
        assert_eq!(t.metrics.accuracy, 1.0);
        let rows: Vec<usize> = (0..5).collect();
        let g3 = oracle_gain(&x, &y, &w, &rows, 3).unwrap();
        for f in 0..5 {
            if let Some(g) = oracle_gain(&x, &y, &w, &rows, f) {
                assert!(g <= g3 + 1e-12, "feature {f} gain {g} beats {g3}");
            }
        }
    }

    #[test]
    fn single_class_is_one_leaf() {
        let x = bits(&[&[0, 1], &[1, 0]]);
        let t = train_tree(&x, &[2, 2], &[1.0, 1.0], None, TreeMode::MultiClass).unwrap();
        assert_eq!(t.node_count, 1);
        assert_eq!(count_nodes(&t), 1);
        assert_eq!(t.nodes[0].prediction, 2);
    }

    #[test]
    fn xor_needs_two_levels() {
        let x = bits(&[&[0, 0], &[0, 1], &[1, 0], &[1, 1]]);
        let y = vec![0, 1, 1, 0];
        let t = train_tree(&x, &y, &[1.0; 4], None, TreeMode::MultiClass).unwrap();
        // zero gain at the root for both features; tie goes to feature 0
        assert_eq!(t.nodes[0].feature, Some(0));
        assert_eq!(t.node_count, 7);
        assert_eq!(count_nodes(&t), 7);
        assert_eq!(t.depth, 2);
        assert_eq!(t.metrics.accuracy, 1.0);
        let stump = train_tree(&x, &y, &[1.0; 4], Some(1), TreeMode::MultiClass).unwrap();
        assert_eq!(stump.node_count, 3);
        assert!(stump.metrics.accuracy < 1.0);
    }

    #[test]
    fn conflicting_identical_rows_are_flagged() {
        let x = bits(&[&[1, 0], &[1, 0], &[0, 1]]);
        let t = train_tree(&x, &[0, 1, 1], &[2.0, 1.0, 1.0], None, TreeMode::MultiClass).unwrap();
        assert!(t.degenerate);
        assert_eq!(t.node_count, 3);
        let leaf = t.predict(&[true, false]);
        assert_eq!(leaf, 0);
    }

    #[test]
    fn input_errors() {
        assert!(train_tree(&[], &[], &[], None, TreeMode::MultiClass).is_err());
        let x = bits(&[&[0], &[1]]);
        assert!(train_tree(&x, &[0], &[1.0, 1.0], None, TreeMode::MultiClass).is_err());
        assert!(train_tree(&x, &[0, 1], &[1.0, 0.0], None, TreeMode::MultiClass).is_err());
        assert!(train_tree(&x, &[0, 2], &[1.0, 1.0], None, TreeMode::BinaryPerCluster).is_err());
    }

    fn check_tree(
        t: &ExplainTree,
        x: &[Vec<bool>],
        y: &[usize],
        w: &[f64],
    ) -> std::result::Result<(), TestCaseError> {
        prop_assert_eq!(count_nodes(t), t.node_count);
        prop_assert_eq!(t.node_count % 2, 1);
        prop_assert_eq!(t.node_count, 2 * t.leaves() - 1);
        // route rows and compare leaf weights, checking greedy optimality
        let mut routed: Vec<Vec<usize>> = vec![Vec::new(); t.nodes.len()];
        routed[0] = (0..x.len()).collect();
        for i in 0..t.nodes.len() {
            let node = &t.nodes[i];
            let rows = routed[i].clone();
            let sum: f64 = rows.iter().map(|&r| w[r]).sum();
            prop_assert!((node.class_weights.iter().sum::<f64>() - sum).abs() < 1e-9);
            if let (Some(f), Some(l), Some(r)) = (node.feature, node.left, node.right) {
                let chosen = oracle_gain(x, y, w, &rows, f).expect("chosen split separates rows");
                for g in 0..x[0].len() {
                    if let Some(other) = oracle_gain(x, y, w, &rows, g) {
                        prop_assert!(other <= chosen + 1e-9, "feature {} beats chosen {}", g, f);
                    }
                }
                let (rr, lr): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&row| x[row][f]);
                routed[l] = lr;
                routed[r] = rr;
                prop_assert_eq!(t.nodes[l].depth, node.depth + 1);
            }
        }
        Ok(())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn structure_and_greedy_optimality(
            rows in proptest::collection::vec((proptest::collection::vec(any::<bool>(), 5), 0usize..3, 0.1f64..5.0), 1..25),
            depth in proptest::option::of(0usize..4),
        ) {
            let x: Vec<Vec<bool>> = rows.iter().map(|r| r.0.clone()).collect();
            let y: Vec<usize> = rows.iter().map(|r| r.1).collect();
            let w: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let t = train_tree(&x, &y, &w, depth, TreeMode::MultiClass).unwrap();
            check_tree(&t, &x, &y, &w)?;
            if let Some(d) = depth { prop_assert!(t.depth <= d); }
        }

        #[test]
        fn consistent_labels_are_fit_exactly_and_capacity_is_monotone(
            codes in proptest::collection::btree_set(0u32..64, 1..30),
            classes in 1usize..5,
            seed in any::<u64>(),
        ) {
            // distinct rows, arbitrary labels -> always feature-consistent
            let x: Vec<Vec<bool>> = codes.iter().map(|c| (0..6).map(|b| c >> b & 1 == 1).collect()).collect();
            let y: Vec<usize> = codes.iter().map(|c| ((*c as u64).wrapping_mul(seed | 1) >> 7) as usize % classes).collect();
            let w = vec![1.0; x.len()];
            let full = train_tree(&x, &y, &w, None, TreeMode::MultiClass).unwrap();
            prop_assert_eq!(full.metrics.accuracy, 1.0);
            prop_assert!(!full.degenerate);
            let mut prev = 0;
            for d in 0..=6 {
                let t = train_tree(&x, &y, &w, Some(d), TreeMode::MultiClass).unwrap();
                prop_assert!(t.node_count >= prev);
                prop_assert!(t.node_count <= full.node_count);
                prev = t.node_count;
            }
        }
    }
}
