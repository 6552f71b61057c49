use proptest::prelude::*;

use xclusters_core::clustering::{hierarchical_cluster, k_medoids, Clustering, Linkage, PamInit};
use xclusters_core::distance::{
    AccuracyMetric, DenseMatrix, Dissimilarity, DistanceContext, ExplainMetric,
};
use xclusters_core::evaluator::{Evaluator, FnSource};
use xclusters_core::evolve::{pareto_dominates, FrontMember, Genome, ParetoFront};
use xclusters_core::monotonicity::{count_violations, Direction};
use xclusters_core::optimizer::{xclusters_optimize, SearchSettings};
use xclusters_core::tree::{count_nodes, CartTrainer, TreeMode, TreeTrainer};

fn symmetric(n: usize) -> impl Strategy<Value = DenseMatrix> {
    proptest::collection::vec(0.0f64..10.0, n * (n - 1) / 2).prop_map(move |upper| {
        DenseMatrix::symmetric_from_fn(n, |i, j| Ok(upper[i * n - i * (i + 1) / 2 + j - i - 1]))
            .unwrap()
    })
}

fn pair_of_matrices() -> impl Strategy<Value = (DenseMatrix, DenseMatrix)> {
    (2usize..9).prop_flat_map(|n| (symmetric(n), symmetric(n)))
}

fn labels_with_k() -> impl Strategy<Value = (DenseMatrix, usize)> {
    (3usize..12).prop_flat_map(|n| (symmetric(n), 1..=n))
}

proptest! {
    #[test]
    fn blend_is_bounded_and_hits_both_ends((a, e) in pair_of_matrices(), alpha in 0.0f64..=1.0) {
        let ctx = DistanceContext::from_matrices(a.clone(), e.clone(), AccuracyMetric::Dtw, ExplainMetric::Jaccard).unwrap();
        let m = ctx.blended(alpha).unwrap();
        let (am, em) = (a.max().max(f64::MIN_POSITIVE), e.max().max(f64::MIN_POSITIVE));
        for i in 0..a.len() {
            for j in 0..a.len() {
                let v = m.row(i)[j];
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
                prop_assert_eq!(v, m.row(j)[i]);
                let a_only = if a.max() > 0.0 { a.row(i)[j] / am } else { a.row(i)[j] };
                let e_only = if e.max() > 0.0 { e.row(i)[j] / em } else { e.row(i)[j] };
                prop_assert!((ctx.combined_distance(i, j, 0.0) - a_only).abs() < 1e-12);
                prop_assert!((ctx.combined_distance(i, j, 1.0) - e_only).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pam_output_is_a_nearest_medoid_partition((m, k) in labels_with_k(), seed in any::<u64>()) {
        for init in [PamInit::Build, PamInit::Random] {
            let c = k_medoids(&m, k, seed, init).unwrap();
            prop_assert_eq!(c.k, k);
            prop_assert!(c.validate(&m, true).is_ok(), "{:?}", c.validate(&m, true));
        }
    }

    #[test]
    fn hierarchical_gives_k_nonempty_clusters((m, k) in labels_with_k()) {
        for linkage in [Linkage::Single, Linkage::Complete, Linkage::Average] {
            let c = hierarchical_cluster(&m, k, linkage).unwrap();
            prop_assert_eq!(c.k, k);
            prop_assert!(c.validate(&m, false).is_ok());
        }
    }

    #[test]
    fn unlimited_tree_fits_distinct_rows(
        rows in proptest::collection::btree_set(proptest::collection::vec(any::<bool>(), 6), 2..20),
        label_seed in proptest::collection::vec(0usize..4, 20),
    ) {
        let features: Vec<Vec<bool>> = rows.into_iter().collect();
        let labels: Vec<usize> = label_seed[..features.len()].to_vec();
        let weights = vec![1.0; features.len()];
        let tree = CartTrainer.train(&features, &labels, &weights, None, TreeMode::MultiClass).unwrap();
        prop_assert_eq!(tree.metrics.accuracy, 1.0);
        prop_assert_eq!(tree.node_count, count_nodes(&tree));
        prop_assert_eq!(tree.node_count, 2 * tree.leaves() - 1);
        for (row, &l) in features.iter().zip(&labels) {
            prop_assert_eq!(tree.predict(row), l);
        }
    }

    #[test]
    fn xclusters_within_epsilon_on_monotone_sources(
        p in 0.3f64..2.0,
        q in 0.3f64..2.0,
        c in 0.1f64..3.0,
        lambda in 0.0f64..4.0,
        eps in prop_oneof![Just(0.0), Just(0.01), Just(0.05), Just(0.2)],
    ) {
        let d = move |k: usize, a: f64| (1.0 + c * a) / (k as f64).powf(p);
        let n = move |k: usize, a: f64| (k as f64).powf(q) * (2.0 - a);
        let s = SearchSettings { lambda, epsilon_b: eps, ..SearchSettings::default() };
        let ev = Evaluator::new(FnSource::new("monotone", d, n));
        let best = xclusters_optimize(&ev, &s).unwrap().best.objective;
        let (d_ref, n_ref) = (d(s.k_min, 1.0), n(s.k_max, 0.0));
        let mut oracle = f64::INFINITY;
        for k in s.k_min..=s.k_max {
            for i in 0..=1000 {
                let a = i as f64 / 1000.0;
                oracle = oracle.min(d(k, a) / d_ref + lambda * n(k, a) / n_ref);
            }
        }
        prop_assert!(best <= oracle + eps + 1e-9, "{best} vs {oracle} + {eps}");
    }

    #[test]
    fn front_is_exactly_the_undominated_set(
        points in proptest::collection::vec((0u8..20, 0u8..20), 1..30),
    ) {
        let dist = DenseMatrix::zeros(points.len());
        let candidates: Vec<FrontMember> = points
            .iter()
            .enumerate()
            .map(|(i, &(v, f))| {
                let mut labels = vec![0; points.len()];
                labels[i] = 1;
                FrontMember {
                    genome: Genome::identity(points.len()),
                    clustering: Clustering::from_labels(&labels, &dist, 0.0, "p").unwrap(),
                    variance: v as f64,
                    f1: f as f64 / 20.0,
                }
            })
            .collect();
        let front = ParetoFront::from_candidates(candidates.clone());
        let mut seen = std::collections::HashSet::new();
        for c in candidates.iter().filter(|c| seen.insert(c.clustering.assignment.clone())) {
            let on_front = front.members.iter().any(|m| m.clustering == c.clustering);
            let dominated = front.members.iter().any(|m| pareto_dominates(m.objectives(), c.objectives()));
            prop_assert!(on_front != dominated);
        }
    }

    #[test]
    fn monotone_sequences_have_no_violations(mut ys in proptest::collection::vec(-5.0f64..5.0, 1..30)) {
        ys.sort_by(f64::total_cmp);
        let up: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, &y)| (i as f64, y)).collect();
        let down: Vec<(f64, f64)> = ys.iter().rev().enumerate().map(|(i, &y)| (i as f64, y)).collect();
        prop_assert_eq!(count_violations(&up, Direction::Increasing), 0);
        prop_assert_eq!(count_violations(&down, Direction::Decreasing), 0);
        prop_assert_eq!(count_violations(&up, Direction::Decreasing), count_violations(&down, Direction::Increasing));
    }
}
