//! Averaged `D` and `N` profiles along each search axis.
//!
//! For every `k` the values are averaged over all grid `alpha`, and for every
//! `alpha` over all grid `k`. The expected directions are: `D` falls with `k`
//! and rises with `alpha`; `N` rises with `k` and falls with `alpha`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::evaluator::Evaluator;
use crate::optimizer::{alpha_grid, SearchSettings};

// Relative slack below which a step against the expected direction is noise.
const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub axis: String,
    pub expected: Direction,
    pub points: Vec<(f64, f64)>,
    pub violations: usize,
}

impl Series {
    fn new(name: &str, axis: &str, expected: Direction, points: Vec<(f64, f64)>) -> Self {
        let violations = count_violations(&points, expected);
        Self {
            name: name.to_string(),
            axis: axis.to_string(),
            expected,
            points,
            violations,
        }
    }
}

/// Adjacent pairs that step against `expected` by more than rounding noise.
/// Flat steps are not violations.
pub fn count_violations(points: &[(f64, f64)], expected: Direction) -> usize {
    points
        .windows(2)
        .filter(|w| {
            let (a, b) = (w[0].1, w[1].1);
            let slack = TOLERANCE * a.abs().max(b.abs()).max(1.0);
            match expected {
                Direction::Increasing => b < a - slack,
                Direction::Decreasing => b > a + slack,
            }
        })
        .count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub k_vs_d: Series,
    pub k_vs_n: Series,
    pub alpha_vs_d: Series,
    pub alpha_vs_n: Series,
}

impl MonotonicityReport {
    pub fn series(&self) -> [&Series; 4] {
        [
            &self.k_vs_d,
            &self.k_vs_n,
            &self.alpha_vs_d,
            &self.alpha_vs_n,
        ]
    }

    pub fn max_violations(&self) -> usize {
        self.series()
            .iter()
            .map(|s| s.violations)
            .max()
            .unwrap_or(0)
    }

    /// One CSV per series plus `violations.json`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for s in self.series() {
            let mut w = csv::Writer::from_path(dir.join(format!("{}.csv", s.name)))?;
            w.write_record([s.axis.as_str(), "mean"])?;
            for (x, y) in &s.points {
                w.write_record([x.to_string(), y.to_string()])?;
            }
            w.flush()?;
        }
        let counts: serde_json::Map<String, serde_json::Value> = self
            .series()
            .iter()
            .map(|s| (s.name.clone(), s.violations.into()))
            .collect();
        fs::write(
            dir.join("violations.json"),
            serde_json::to_string_pretty(&counts)?,
        )?;
        Ok(())
    }
}

/// Evaluates the full `k` by `alpha` grid (cache permitting) and averages.
pub fn monotonicity_report(ev: &Evaluator, s: &SearchSettings) -> Result<MonotonicityReport> {
    s.validate()?;
    ev.init_normalization(s.k_min, s.k_max)?;
    let ks = s.k_grid();
    let alphas = alpha_grid(s.alpha_step)?;
    let points: Vec<(usize, f64)> = ks
        .iter()
        .flat_map(|&k| alphas.iter().map(move |&a| (k, a)))
        .collect();
    let evals = ev.evaluate_many(&points, s.lambda)?;
    let at = |ki: usize, ai: usize| &evals[ki * alphas.len() + ai];
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;

    let by_k = |f: &dyn Fn(usize, usize) -> f64| -> Vec<(f64, f64)> {
        (0..ks.len())
            .map(|ki| {
                (
                    ks[ki] as f64,
                    mean((0..alphas.len()).map(|ai| f(ki, ai)).collect()),
                )
            })
            .collect()
    };
    let by_alpha = |f: &dyn Fn(usize, usize) -> f64| -> Vec<(f64, f64)> {
        (0..alphas.len())
            .map(|ai| {
                (
                    alphas[ai],
                    mean((0..ks.len()).map(|ki| f(ki, ai)).collect()),
                )
            })
            .collect()
    };
    let d = |ki: usize, ai: usize| at(ki, ai).d;
    let n = |ki: usize, ai: usize| at(ki, ai).n;
    Ok(MonotonicityReport {
        k_vs_d: Series::new("k_vs_D", "k", Direction::Decreasing, by_k(&d)),
        k_vs_n: Series::new("k_vs_N", "k", Direction::Increasing, by_k(&n)),
        alpha_vs_d: Series::new("alpha_vs_D", "alpha", Direction::Increasing, by_alpha(&d)),
        alpha_vs_n: Series::new("alpha_vs_N", "alpha", Direction::Decreasing, by_alpha(&n)),
    })
}
