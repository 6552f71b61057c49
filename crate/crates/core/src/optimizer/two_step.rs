use std::collections::BTreeMap;
use std::time::Instant;

use super::{prepare, OptimizerReport, SearchSettings};
use crate::clustering::elbow_k;
use crate::error::Result;
use crate::evaluator::Evaluator;

/// Trend-only clustering: distortion over the `k` grid at `alpha = 0`, the
/// elbow `k`, then one full evaluation there.
///
/// Normalization is fixed first, which fully evaluates the two reference
/// corners as every other method does.
pub fn two_step(ev: &Evaluator, s: &SearchSettings) -> Result<OptimizerReport> {
    let started = Instant::now();
    let before = ev.stats();
    prepare(ev, s)?;
    let mut curve = BTreeMap::new();
    for k in s.k_grid() {
        curve.insert(k, ev.distortion(k, 0.0)?.0);
    }
    let k = elbow_k(&curve)?;
    let best = ev.evaluate(k, 0.0, s.lambda)?;
    let mut report = OptimizerReport::finish("two-step", best, ev.stats().since(&before), started);
    report.elbow_k = Some(k);
    Ok(report)
}
