//! Artifact files of a run.
//!
//! | file            | content                                              |
//! |-----------------|------------------------------------------------------|
//! | `manifest.json` | full configuration, dataset summary, result, files   |
//! | `clusters.csv`  | `id,label,weight,cluster,is_medoid`                  |
//! | `tree.dot`      | Graphviz text of the multi-class tree                |
//! | `tree.json`     | the same tree as JSON, with feature and class names  |
//! | `metrics.json`  | distortion, tree size, objective, F1 and variance    |
//! | `cache.csv`     | every evaluated `(k, alpha)`, for searching methods  |
//! | `front.csv`     | Pareto front of the evolutionary method              |
//! | `trace.csv`     | bound trace of the branch-and-bound                  |
//! | `sweep.csv`     | every clustering of the blend-weight sweep           |
//! | `timing.json`   | wall-clock time; the only non-deterministic file     |
//!
//! Everything but `timing.json` is a pure function of the configuration.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::methods::RunOutcome;
use crate::tree::{export_dot, ExplainTree};

pub const MANIFEST: &str = "manifest.json";

/// Content of `tree.json`: enough to redraw the tree without the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub tree: ExplainTree,
}

impl TreeDocument {
    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn to_dot(&self) -> String {
        export_dot(&self.tree, &self.feature_names, &self.class_names)
    }
}

fn create(dir: &Path, name: &str, written: &mut Vec<String>) -> Result<BufWriter<File>> {
    written.push(name.to_string());
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_text(dir: &Path, name: &str, text: &str, written: &mut Vec<String>) -> Result<()> {
    written.push(name.to_string());
    fs::write(dir.join(name), text)?;
    Ok(())
}

/// Writes every artifact of `run` into `dir`, creating it if needed, and
/// returns the file names written.
pub fn write_artifacts(run: &RunOutcome, dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let rc = &run.context;
    let out = &run.outcome;
    let mut written = Vec::new();

    let mut w = csv::Writer::from_writer(create(dir, "clusters.csv", &mut written)?);
    w.write_record(["id", "label", "weight", "cluster", "is_medoid"])?;
    for (d, &c) in rc
        .dataset
        .demographics
        .iter()
        .zip(&out.clustering.assignment)
    {
        w.write_record([
            d.id.to_string(),
            d.label.clone(),
            d.weight.to_string(),
            c.to_string(),
            out.clustering.medoids.contains(&d.id).to_string(),
        ])?;
    }
    w.flush()?;

    let doc = TreeDocument {
        feature_names: rc.dataset.feature_names.clone(),
        class_names: (0..out.clustering.k)
            .map(|c| format!("cluster {c}"))
            .collect(),
        tree: out.tree.clone(),
    };
    write_text(dir, "tree.dot", &doc.to_dot(), &mut written)?;
    write_text(
        dir,
        "tree.json",
        &serde_json::to_string_pretty(&doc)?,
        &mut written,
    )?;
    write_text(
        dir,
        "metrics.json",
        &serde_json::to_string_pretty(&run.metrics)?,
        &mut written,
    )?;

    if out.write_cache {
        rc.evaluator.write_cache_csv(
            rc.config.search.lambda,
            create(dir, "cache.csv", &mut written)?,
        )?;
    }
    if let Some(report) = &out.report {
        if !report.trace.is_empty() {
            report.write_trace_csv(create(dir, "trace.csv", &mut written)?)?;
        }
    }
    if let Some(front) = &out.front {
        front.write_csv(create(dir, "front.csv", &mut written)?)?;
    }
    if !out.alternatives.is_empty() {
        let mut w = csv::Writer::from_writer(create(dir, "sweep.csv", &mut written)?);
        w.write_record(["alpha", "k", "distortion", "variance", "weighted_f1"])?;
        for c in &out.alternatives {
            let (variance, f1) = rc.score(c)?;
            w.write_record([
                c.alpha.to_string(),
                c.k.to_string(),
                c.distortion.to_string(),
                variance.to_string(),
                f1.to_string(),
            ])?;
        }
        w.flush()?;
    }

    let timing = json!({
        "wall_time_ms": out.report.as_ref().map(|r| r.wall_time_ms),
    });
    write_text(
        dir,
        "timing.json",
        &serde_json::to_string_pretty(&timing)?,
        &mut written,
    )?;

    written.push(MANIFEST.to_string());
    let search = out.report.as_ref().map(|r| {
        json!({
            "evaluations": r.evaluations,
            "cluster_runs": r.cluster_runs,
            "tree_runs": r.tree_runs,
            "blocks_created": r.blocks_created,
            "blocks_pruned": r.blocks_pruned,
            "elbow_k": r.elbow_k,
        })
    });
    let manifest = json!({
        "tool": "xclusters",
        "version": env!("CARGO_PKG_VERSION"),
        "method": out.method,
        "config": rc.config,
        "dataset": {
            "demographics": rc.dataset.len(),
            "series_length": rc.dataset.series_len(),
            "features": rc.dataset.feature_names.len(),
            "total_weight": rc.dataset.total_weight,
            "dropped_weight": rc.dataset.dropped_weight,
            "source": match &rc.config.data.path {
                Some(p) => json!({ "path": p }),
                None => json!({ "synthetic": rc.config.data.synthetic }),
            },
        },
        "normalization": rc.evaluator.normalization(),
        "result": {
            "k": out.clustering.k,
            "alpha": out.clustering.alpha,
            "objective": run.metrics.objective,
            "node_count": out.tree.node_count,
        },
        "search": search,
        "details": out.details,
        "files": written,
    });
    fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    Ok(written)
}

/// The configuration recorded in a manifest, for re-running.
pub fn config_from_manifest(path: &Path) -> Result<RunConfig> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    let config = value
        .get("config")
        .cloned()
        .ok_or_else(|| Error::InvalidInput(format!("{} has no config", path.display())))?;
    Ok(serde_json::from_value(config)?)
}

/// Output directory: the override if given, else the configured one.
pub fn resolve_output_dir(config: &RunConfig, override_dir: Option<PathBuf>) -> PathBuf {
    override_dir.unwrap_or_else(|| config.output_dir.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::methods::run;

    #[test]
    fn grid_run_writes_full_cache_and_rerunnable_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = RunConfig {
            method: "grid".into(),
            ..RunConfig::default()
        };
        c.data.synthetic.per_group = 5;
        c.data.synthetic.length = 16;
        let files = write_artifacts(&run(&c).unwrap(), dir.path()).unwrap();
        for f in [
            "manifest.json",
            "clusters.csv",
            "tree.dot",
            "tree.json",
            "metrics.json",
            "cache.csv",
        ] {
            assert!(files.iter().any(|x| x == f), "{f} missing");
        }
        let cache = fs::read_to_string(dir.path().join("cache.csv")).unwrap();
        assert_eq!(cache.lines().count(), 1 + 189);
        assert_eq!(config_from_manifest(&dir.path().join(MANIFEST)).unwrap(), c);
        let doc = TreeDocument::read(&dir.path().join("tree.json")).unwrap();
        assert_eq!(
            doc.to_dot(),
            fs::read_to_string(dir.path().join("tree.dot")).unwrap()
        );
    }
}
