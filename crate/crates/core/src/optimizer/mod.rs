//! Search over `(k, alpha)` for the smallest `D + lambda * N`.
//!
//! [`xclusters_optimize`] is a branch-and-bound over blocks of the parameter
//! box; [`grid_search`] and [`two_step`] are the exhaustive and elbow
//! baselines. All three read objectives through a shared [`Evaluator`], so
//! running several against one evaluator reuses earlier work.

mod block;
mod grid;
mod two_step;
mod xclusters;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use block::{compute_bounds, split, Block, Region};
pub use grid::{alpha_grid, grid_search};
pub use two_step::two_step;
pub use xclusters::xclusters_optimize;

use crate::error::{Error, Result};
use crate::evaluator::{CacheStats, Evaluation, Evaluator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSettings {
    pub k_min: usize,
    pub k_max: usize,
    pub lambda: f64,
    pub epsilon_b: f64,
    pub delta_alpha: f64,
    /// Alpha spacing of the grid baseline.
    pub alpha_step: f64,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            k_min: 3,
            k_max: 11,
            lambda: 1.0,
            epsilon_b: 0.05,
            delta_alpha: 0.01,
            alpha_step: 0.05,
        }
    }
}

impl SearchSettings {
    pub fn validate(&self) -> Result<()> {
        if self.k_min < 1 || self.k_max < self.k_min {
            return Err(Error::param(
                "k range",
                format!("[{}, {}] is empty", self.k_min, self.k_max),
            ));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::param("lambda", "must be finite and >= 0"));
        }
        if !(self.epsilon_b >= 0.0 && self.epsilon_b.is_finite()) {
            return Err(Error::param("epsilon_b", "must be finite and >= 0"));
        }
        if !(self.delta_alpha > 0.0 && self.delta_alpha <= 1.0) {
            return Err(Error::param("delta_alpha", "must lie in (0, 1]"));
        }
        if !(self.alpha_step > 0.0 && self.alpha_step <= 1.0) {
            return Err(Error::param("alpha_step", "must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn k_grid(&self) -> Vec<usize> {
        (self.k_min..=self.k_max).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceAction {
    Root,
    Created,
    Split,
    Pruned,
    Retired,
    Incumbent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub iteration: usize,
    pub block: usize,
    pub action: TraceAction,
    pub region: Region,
    pub lower: f64,
    pub upper: f64,
    /// Incumbent objective after the event.
    pub incumbent: f64,
}

impl TraceEvent {
    fn new(iteration: usize, b: &Block, action: TraceAction, incumbent: f64) -> Self {
        Self {
            iteration,
            block: b.id,
            action,
            region: b.region,
            lower: b.lower,
            upper: b.upper,
            incumbent,
        }
    }
}

/// Outcome of one search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerReport {
    pub method: String,
    pub best: Evaluation,
    /// Cache misses caused by this search.
    pub evaluations: usize,
    pub cluster_runs: usize,
    pub tree_runs: usize,
    pub blocks_created: usize,
    pub blocks_pruned: usize,
    pub wall_time_ms: f64,
    /// Elbow choice of the two-step baseline.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elbow_k: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceEvent>,
    /// Every block ever bounded, in creation order.
    #[serde(skip)]
    pub blocks: Vec<Block>,
}

impl OptimizerReport {
    fn finish(
        method: &str,
        best: Evaluation,
        stats: CacheStats,
        started: std::time::Instant,
    ) -> Self {
        Self {
            method: method.to_string(),
            best,
            evaluations: stats.misses,
            cluster_runs: stats.cluster_runs,
            tree_runs: stats.tree_runs,
            blocks_created: 0,
            blocks_pruned: 0,
            wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
            elbow_k: None,
            trace: Vec::new(),
            blocks: Vec::new(),
        }
    }

    /// The trace as CSV for plotting bound convergence.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "iteration",
            "block",
            "action",
            "k_lo",
            "k_hi",
            "alpha_lo",
            "alpha_hi",
            "lower",
            "upper",
            "incumbent",
        ])?;
        for e in &self.trace {
            let action = serde_json::to_value(e.action)?;
            w.write_record([
                e.iteration.to_string(),
                e.block.to_string(),
                action.as_str().unwrap_or_default().to_string(),
                e.region.k_lo.to_string(),
                e.region.k_hi.to_string(),
                e.region.alpha_lo.to_string(),
                e.region.alpha_hi.to_string(),
                e.lower.to_string(),
                e.upper.to_string(),
                e.incumbent.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fixes the normalization from the search box before any search reads an
/// objective.
pub(crate) fn prepare(ev: &Evaluator, s: &SearchSettings) -> Result<()> {
    s.validate()?;
    ev.init_normalization(s.k_min, s.k_max)?;
    Ok(())
}
