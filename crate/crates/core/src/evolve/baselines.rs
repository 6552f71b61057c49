use serde::{Deserialize, Serialize};

use crate::clustering::{hierarchical_cluster, Clustering, Linkage};
use crate::distance::{check_alpha, DenseMatrix, Dissimilarity, DistanceContext};
use crate::error::{Error, Result};

/// Blend weights tried by [`combined_sweep`] when none are given.
pub const DEFAULT_SWEEP: [f64; 3] = [0.25, 0.5, 0.75];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LexOrder {
    #[default]
    TsThenFeature,
    FeatureThenTs,
}

fn submatrix(dist: &DenseMatrix, members: &[usize]) -> Result<DenseMatrix> {
    DenseMatrix::from_rows(
        members
            .iter()
            .map(|&i| members.iter().map(|&j| dist.get(i, j)).collect())
            .collect(),
    )
}

/// Clusters on one metric into `k1` groups, then splits every group on the
/// other metric into `min(k2, size)` subgroups.
pub fn lexicographic(
    ctx: &DistanceContext,
    order: LexOrder,
    k1: usize,
    k2: usize,
    linkage: Linkage,
) -> Result<Clustering> {
    if k1 < 1 || k2 < 1 {
        return Err(Error::param("k", "both stages need k >= 1"));
    }
    let (first, second, tag) = match order {
        LexOrder::TsThenFeature => (&ctx.a_matrix, &ctx.e_matrix, "lexicographic-ts-feature"),
        LexOrder::FeatureThenTs => (&ctx.e_matrix, &ctx.a_matrix, "lexicographic-feature-ts"),
    };
    let outer = hierarchical_cluster(first, k1, linkage)?;
    let mut labels = vec![0; ctx.len()];
    let mut next = 0;
    for members in outer.members() {
        let inner = hierarchical_cluster(
            &submatrix(second, &members)?,
            k2.min(members.len()),
            linkage,
        )?;
        for (pos, &m) in members.iter().enumerate() {
            labels[m] = next + inner.assignment[pos];
        }
        next += inner.k;
    }
    Clustering::from_labels(&labels, &ctx.a_matrix, 0.0, tag)
}

/// One hierarchical clustering of the blended distance per weight.
pub fn combined_sweep(
    ctx: &DistanceContext,
    alphas: &[f64],
    k: usize,
    linkage: Linkage,
) -> Result<Vec<Clustering>> {
    alphas
        .iter()
        .map(|&alpha| {
            check_alpha(alpha)?;
            let mut c = hierarchical_cluster(&ctx.blended(alpha)?, k, linkage)?;
            c.alpha = alpha;
            c.method_tag = format!("combined-{alpha}");
            Ok(c)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::{AccuracyMetric, ExplainMetric};

    fn ctx() -> DistanceContext {
        let line = |p: &[f64]| {
            DenseMatrix::from_rows(
                p.iter()
                    .map(|a| p.iter().map(|b| (a - b).abs()).collect())
                    .collect(),
            )
            .unwrap()
        };
        DistanceContext::from_matrices(
            line(&[0.0, 0.1, 5.0, 5.1, 9.0, 9.2]),
            line(&[0.0, 7.0, 0.2, 7.1, 0.1, 7.3]),
            AccuracyMetric::Dtw,
            ExplainMetric::Jaccard,
        )
        .unwrap()
    }

    #[test]
    fn second_stage_of_one_is_first_stage() {
        let c = ctx();
        let lex = lexicographic(&c, LexOrder::TsThenFeature, 3, 1, Linkage::Average).unwrap();
        let first = hierarchical_cluster(&c.a_matrix, 3, Linkage::Average).unwrap();
        assert!(lex.same_partition(&first));
    }

    #[test]
    fn first_stage_of_one_is_second_metric_only() {
        let c = ctx();
        let lex = lexicographic(&c, LexOrder::TsThenFeature, 1, 2, Linkage::Average).unwrap();
        let e = hierarchical_cluster(&c.e_matrix, 2, Linkage::Average).unwrap();
        assert!(lex.same_partition(&e));
    }

    #[test]
    fn refines_but_never_merges() {
        let c = ctx();
        let first = hierarchical_cluster(&c.a_matrix, 3, Linkage::Average).unwrap();
        let lex = lexicographic(&c, LexOrder::TsThenFeature, 3, 2, Linkage::Average).unwrap();
        assert_eq!(lex.k, 6);
        for (i, j) in (0..6).flat_map(|i| (0..6).map(move |j| (i, j))) {
            if lex.assignment[i] == lex.assignment[j] {
                assert_eq!(first.assignment[i], first.assignment[j]);
            }
        }
        assert!(lexicographic(&c, LexOrder::FeatureThenTs, 0, 2, Linkage::Average).is_err());
    }

    #[test]
    fn sweep_extremes_and_default() {
        let c = ctx();
        let trend = combined_sweep(&c, &[0.0], 3, Linkage::Average).unwrap();
        assert!(trend[0]
            .same_partition(&hierarchical_cluster(&c.a_matrix, 3, Linkage::Average).unwrap()));
        let feat = combined_sweep(&c, &[1.0], 2, Linkage::Average).unwrap();
        assert!(feat[0]
            .same_partition(&hierarchical_cluster(&c.e_matrix, 2, Linkage::Average).unwrap()));
        assert_eq!(
            combined_sweep(&c, &DEFAULT_SWEEP, 2, Linkage::Average)
                .unwrap()
                .len(),
            3
        );
        assert!(combined_sweep(&c, &[1.5], 2, Linkage::Average).is_err());
    }
}
