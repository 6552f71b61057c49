use std::time::Instant;

use super::{prepare, OptimizerReport, SearchSettings};
use crate::error::{Error, Result};
use crate::evaluator::Evaluator;

/// `0, step, 2 step, ..., 1`; the last point is exactly 1.
pub fn alpha_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::param("alpha_step", "must lie in (0, 1]"));
    }
    let n = (1.0 / step).round() as usize;
    Ok((0..=n).map(|i| i as f64 / n as f64).collect())
}

/// Exhaustive scan of `k_min..=k_max` times the alpha grid; the first of
/// equal objectives in `(k, alpha)` order wins.
pub fn grid_search(ev: &Evaluator, s: &SearchSettings) -> Result<OptimizerReport> {
    let started = Instant::now();
    let before = ev.stats();
    prepare(ev, s)?;
    let alphas = alpha_grid(s.alpha_step)?;
    let points: Vec<(usize, f64)> = s
        .k_grid()
        .into_iter()
        .flat_map(|k| alphas.iter().map(move |&a| (k, a)))
        .collect();
    let evals = ev.evaluate_many(&points, s.lambda)?;
    let best = evals
        .into_iter()
        .reduce(|best, e| {
            if e.objective < best.objective {
                e
            } else {
                best
            }
        })
        .ok_or(Error::Empty("grid"))?;
    Ok(OptimizerReport::finish(
        "grid",
        best,
        ev.stats().since(&before),
        started,
    ))
}
