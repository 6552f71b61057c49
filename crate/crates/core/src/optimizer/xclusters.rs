use std::time::Instant;

use super::block::{compute_bounds, split, Block, Region};
use super::{prepare, OptimizerReport, SearchSettings, TraceAction, TraceEvent};
use crate::error::Result;
use crate::evaluator::Evaluator;

/// Branch-and-bound over the `[k_min, k_max] x [0, 1]` box.
///
/// The queued block with the smallest lower bound (earliest created on ties)
/// is taken each round. Blocks too small to split retire after their corners
/// have competed for the incumbent; splittable ones are replaced by their two
/// halves. After every round, queued blocks whose lower bound plus
/// `epsilon_b` reaches the incumbent are dropped.
pub fn xclusters_optimize(ev: &Evaluator, s: &SearchSettings) -> Result<OptimizerReport> {
    let started = Instant::now();
    let before = ev.stats();
    prepare(ev, s)?;
    let eps = s.epsilon_b;

    let root = compute_bounds(0, Region::new(s.k_min, s.k_max, 0.0, 1.0)?, ev, s.lambda)?;
    let mut best = root.witness.clone();
    let mut trace = vec![TraceEvent::new(0, &root, TraceAction::Root, best.objective)];
    let mut blocks = vec![root.clone()];
    let mut queue: Vec<Block> = vec![root];
    let mut pruned = 0;
    let mut iteration = 0;

    while !queue.is_empty() {
        iteration += 1;
        let pos = queue
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| a.lower.total_cmp(&b.lower).then(a.id.cmp(&b.id)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let block = queue.remove(pos);
        if block.region.is_atomic(s.delta_alpha) {
            trace.push(TraceEvent::new(
                iteration,
                &block,
                TraceAction::Retired,
                best.objective,
            ));
            continue;
        }
        trace.push(TraceEvent::new(
            iteration,
            &block,
            TraceAction::Split,
            best.objective,
        ));
        let (left, right) = split(&block.region, s.k_min, s.k_max, s.delta_alpha)?;
        let (a, b) = rayon::join(
            || compute_bounds(blocks.len(), left, ev, s.lambda),
            || compute_bounds(blocks.len() + 1, right, ev, s.lambda),
        );
        for child in [a?, b?] {
            trace.push(TraceEvent::new(
                iteration,
                &child,
                TraceAction::Created,
                best.objective,
            ));
            if child.upper < best.objective {
                best = child.witness.clone();
                trace.push(TraceEvent::new(
                    iteration,
                    &child,
                    TraceAction::Incumbent,
                    best.objective,
                ));
            }
            blocks.push(child.clone());
            queue.push(child);
        }
        let bound = best.objective;
        queue.retain(|q| {
            let keep = q.lower + eps < bound;
            if !keep {
                pruned += 1;
                trace.push(TraceEvent::new(iteration, q, TraceAction::Pruned, bound));
            }
            keep
        });
    }

    let mut report = OptimizerReport::finish("xclusters", best, ev.stats().since(&before), started);
    report.blocks_created = blocks.len();
    report.blocks_pruned = pruned;
    report.trace = trace;
    report.blocks = blocks;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::FnSource;

    fn dyadic_optimum(ev: &Evaluator, s: &SearchSettings) -> f64 {
        // alpha grid at the finest dyadic depth the search can reach
        let mut depth = 0;
        while 1.0 / f64::from(1u32 << depth) > s.delta_alpha + 1e-12 {
            depth += 1;
        }
        let steps = 1u32 << depth;
        let mut best = f64::INFINITY;
        for k in s.k_min..=s.k_max {
            for i in 0..=steps {
                let o = ev
                    .evaluate(k, f64::from(i) / f64::from(steps), s.lambda)
                    .unwrap()
                    .objective;
                best = best.min(o);
            }
        }
        best
    }

    #[test]
    fn exact_on_stub_without_tolerance() {
        let s = SearchSettings {
            epsilon_b: 0.0,
            ..SearchSettings::default()
        };
        let ev = Evaluator::new(FnSource::analytic());
        let r = xclusters_optimize(&ev, &s).unwrap();
        let oracle = Evaluator::new(FnSource::analytic());
        oracle.init_normalization(s.k_min, s.k_max).unwrap();
        assert_eq!(r.best.objective, dyadic_optimum(&oracle, &s));
    }

    #[test]
    fn tolerance_optimal_and_cheap_on_stub() {
        let s = SearchSettings::default();
        let ev = Evaluator::new(FnSource::analytic());
        let r = xclusters_optimize(&ev, &s).unwrap();
        let oracle = Evaluator::new(FnSource::analytic());
        oracle.init_normalization(s.k_min, s.k_max).unwrap();
        let mut grid_min = f64::INFINITY;
        for k in 3..=11 {
            for i in 0..=100 {
                grid_min = grid_min.min(
                    oracle
                        .evaluate(k, f64::from(i) / 100.0, 1.0)
                        .unwrap()
                        .objective,
                );
            }
        }
        assert!(r.best.objective <= grid_min + s.epsilon_b);
        assert!(r.evaluations <= 94, "{} evaluations", r.evaluations);
        assert_eq!(r.evaluations, ev.stats().misses);
    }

    #[test]
    fn constant_source_stops_after_first_split() {
        let ev = Evaluator::new(FnSource::constant(0.5, 2.0));
        let r = xclusters_optimize(&ev, &SearchSettings::default()).unwrap();
        assert_eq!(r.blocks_created, 3);
        assert_eq!(r.blocks_pruned, 2);
        assert_eq!(r.best.objective, 2.0);
    }

    #[test]
    fn incumbent_never_rises_and_bounds_are_ordered() {
        let ev = Evaluator::new(FnSource::new(
            "bumpy",
            |k, a| ((k as f64) * 1.7 + a * 5.0).sin().abs() + 1.0 / k as f64,
            |k, a| (k as f64) * (1.5 - a) + (a * 9.0).cos(),
        ));
        let r = xclusters_optimize(&ev, &SearchSettings::default()).unwrap();
        assert!(r.trace.windows(2).all(|w| w[1].incumbent <= w[0].incumbent));
        assert!(r.blocks.iter().all(|b| b.lower <= b.upper));
        assert!(r.blocks.iter().all(|b| b.upper == b.witness.objective));
    }
}
