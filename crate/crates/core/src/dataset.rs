//! Temporal relation ingestion, demographic aggregation and synthetic data.
//!
//! A temporal relation is a table with one timestamp column, one non-negative
//! value column and a number of categorical attribute columns. Rows are grouped
//! by the value combination of a configured attribute subset; each surviving
//! combination becomes a [`Demographic`] with a daily series and a weight.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

type ParsedRow = (NaiveDate, f64, Vec<(String, String)>);

/// One parsed row of a temporal relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalRecord {
    /// Day index relative to the relation's epoch.
    pub timestamp: i64,
    pub value: f64,
    pub features: Vec<(String, String)>,
}

impl TemporalRecord {
    fn feature(&self, name: &str) -> Option<&str> {
        self.features
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_str())
    }
}

/// Column roles of a temporal relation CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub timestamp: String,
    pub value: String,
    pub features: Vec<String>,
    #[serde(default = "default_date_format")]
    pub date_format: String,
    /// Inclusive date bounds; rows outside are skipped.
    #[serde(default)]
    pub start: Option<String>,
    #[serde(default)]
    pub end: Option<String>,
}

fn default_date_format() -> String {
    "%Y-%m-%d".to_string()
}

impl ColumnSchema {
    pub fn new(timestamp: &str, value: &str, features: &[&str]) -> Self {
        Self {
            timestamp: timestamp.to_string(),
            value: value.to_string(),
            features: features.iter().map(|s| s.to_string()).collect(),
            date_format: default_date_format(),
            start: None,
            end: None,
        }
    }
}

/// Result of reading a relation: the records plus the bookkeeping needed to
/// report what was dropped.
#[derive(Debug, Clone)]
pub struct LoadedRelation {
    pub records: Vec<TemporalRecord>,
    pub skipped: usize,
    /// Calendar date of day index 0.
    pub epoch: NaiveDate,
}

pub fn load_temporal_relation(path: &Path, schema: &ColumnSchema) -> Result<LoadedRelation> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    if schema.features.is_empty() {
        return Err(Error::InvalidInput(
            "schema needs at least one feature column".into(),
        ));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(Error::ZeroParseableRows { skipped: 0 });
    }
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let ts_col = column(&schema.timestamp)?;
    let value_col = column(&schema.value)?;
    let feature_cols = schema
        .features
        .iter()
        .map(|f| column(f))
        .collect::<Result<Vec<_>>>()?;

    let parse_date = |s: &str| NaiveDate::parse_from_str(s.trim(), &schema.date_format).ok();
    let bound = |b: &Option<String>| -> Result<Option<NaiveDate>> {
        match b {
            None => Ok(None),
            Some(s) => parse_date(s)
                .map(Some)
                .ok_or_else(|| Error::InvalidInput(format!("bad date bound `{s}`"))),
        }
    };
    let start = bound(&schema.start)?;
    let end = bound(&schema.end)?;

    let mut parsed: Vec<ParsedRow> = Vec::new();
    let mut skipped = 0usize;
    for row in reader.records() {
        let row = match row {
            Ok(r) => r,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let date = row.get(ts_col).and_then(parse_date);
        let value = row
            .get(value_col)
            .and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|v| v.is_finite() && *v >= 0.0);
        let features: Option<Vec<_>> = schema
            .features
            .iter()
            .zip(&feature_cols)
            .map(|(name, &c)| row.get(c).map(|v| (name.clone(), v.trim().to_string())))
            .collect();
        match (date, value, features) {
            (Some(d), Some(v), Some(f))
                if start.is_none_or(|s| d >= s) && end.is_none_or(|e| d <= e) =>
            {
                parsed.push((d, v, f))
            }
            _ => skipped += 1,
        }
    }
    if skipped > 0 {
        log::warn!("{}: skipped {skipped} unparseable rows", path.display());
    }
    let epoch = match start.or_else(|| parsed.iter().map(|(d, _, _)| *d).min()) {
        Some(e) if !parsed.is_empty() => e,
        _ => return Err(Error::ZeroParseableRows { skipped }),
    };
    let records = parsed
        .into_iter()
        .map(|(d, value, features)| TemporalRecord {
            timestamp: (d - epoch).num_days(),
            value,
            features,
        })
        .collect();
    Ok(LoadedRelation {
        records,
        skipped,
        epoch,
    })
}

/// One analysis unit: a conjunction of attribute values with its series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demographic {
    pub id: usize,
    pub label: String,
    pub feature_vector: Vec<bool>,
    pub weight: f64,
    pub series: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub demographics: Vec<Demographic>,
    pub feature_names: Vec<String>,
    pub total_weight: f64,
    /// Inclusive day-index range covered by every series.
    pub date_range: (i64, i64),
    /// Weight of combinations removed by the threshold.
    #[serde(default)]
    pub dropped_weight: f64,
}

impl Dataset {
    /// Assembles a dataset, checking the shared-shape invariants.
    pub fn new(
        demographics: Vec<Demographic>,
        feature_names: Vec<String>,
        date_range: (i64, i64),
    ) -> Result<Self> {
        let len = demographics
            .first()
            .map(|d| d.series.len())
            .ok_or(Error::Empty("dataset has no demographics"))?;
        for (i, d) in demographics.iter().enumerate() {
            if d.id != i {
                return Err(Error::InvalidInput(format!(
                    "demographic ids must be dense, found {} at {i}",
                    d.id
                )));
            }
            if d.series.len() != len {
                return Err(Error::LengthMismatch {
                    left: len,
                    right: d.series.len(),
                });
            }
            if d.feature_vector.len() != feature_names.len() {
                return Err(Error::LengthMismatch {
                    left: feature_names.len(),
                    right: d.feature_vector.len(),
                });
            }
            if d.weight.is_nan() || d.weight <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "demographic {i} has weight {}",
                    d.weight
                )));
            }
            if !d.feature_vector.iter().any(|&b| b) {
                return Err(Error::InvalidInput(format!(
                    "demographic {i} has no feature bit set"
                )));
            }
        }
        let total_weight = demographics.iter().map(|d| d.weight).sum();
        Ok(Self {
            demographics,
            feature_names,
            total_weight,
            date_range,
            dropped_weight: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.demographics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demographics.is_empty()
    }

    pub fn series_len(&self) -> usize {
        self.demographics.first().map_or(0, |d| d.series.len())
    }

    pub fn weights(&self) -> Vec<f64> {
        self.demographics.iter().map(|d| d.weight).collect()
    }

    pub fn features(&self) -> Vec<Vec<bool>> {
        self.demographics
            .iter()
            .map(|d| d.feature_vector.clone())
            .collect()
    }

    pub fn series(&self) -> Vec<Vec<f64>> {
        self.demographics.iter().map(|d| d.series.clone()).collect()
    }

    pub fn labels(&self) -> Vec<String> {
        self.demographics.iter().map(|d| d.label.clone()).collect()
    }

    /// Applies a trailing moving average to every series.
    pub fn smoothed(&self, window: usize) -> Result<Self> {
        let mut out = self.clone();
        for d in &mut out.demographics {
            d.series = moving_average(&d.series, window)?;
        }
        Ok(out)
    }

    /// Rescales each series to `[0, 1]`; constant series become all zeros.
    pub fn min_max_normalized(&self) -> Self {
        let mut out = self.clone();
        for d in &mut out.demographics {
            min_max_normalize(&mut d.series);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn min_max_normalize(series: &mut [f64]) {
    let (lo, hi) = series
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    for v in series.iter_mut() {
        *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
    }
}

/// Groups records by their values on `combo_features` and keeps every
/// combination whose summed value reaches `min_weight_fraction` of the total.
pub fn aggregate_demographics(
    records: &[TemporalRecord],
    combo_features: &[String],
    min_weight_fraction: f64,
) -> Result<Dataset> {
    if records.is_empty() {
        return Err(Error::Empty("no records to aggregate"));
    }
    if combo_features.is_empty() {
        return Err(Error::param(
            "combo_features",
            "must name at least one attribute",
        ));
    }
    if !(0.0..=1.0).contains(&min_weight_fraction) {
        return Err(Error::param("min_weight_fraction", "must lie in [0, 1]"));
    }
    for name in combo_features {
        if records[0].feature(name).is_none() {
            return Err(Error::MissingColumn(name.clone()));
        }
    }
    let start = records.iter().map(|r| r.timestamp).min().unwrap_or(0);
    let end = records.iter().map(|r| r.timestamp).max().unwrap_or(0);
    let len = (end - start + 1) as usize;

    let mut combos: BTreeMap<Vec<String>, Vec<f64>> = BTreeMap::new();
    let mut grand_total = 0.0;
    for r in records {
        let key = combo_features
            .iter()
            .map(|f| {
                r.feature(f)
                    .map(str::to_string)
                    .ok_or_else(|| Error::MissingColumn(f.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let series = combos.entry(key).or_insert_with(|| vec![0.0; len]);
        series[(r.timestamp - start) as usize] += r.value;
        grand_total += r.value;
    }

    let threshold = min_weight_fraction * grand_total;
    let mut kept = Vec::new();
    let mut dropped_weight = 0.0;
    for (key, series) in combos {
        let weight: f64 = series.iter().sum();
        if weight > 0.0 && weight >= threshold {
            kept.push((key, series, weight));
        } else {
            dropped_weight += weight;
        }
    }
    if kept.is_empty() {
        return Err(Error::NothingSurvivesThreshold { threshold });
    }

    // One-hot dictionary over the values that appear among kept combinations.
    let mut values: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); combo_features.len()];
    for (key, _, _) in &kept {
        for (slot, v) in values.iter_mut().zip(key) {
            slot.insert(v.as_str());
        }
    }
    let mut feature_names = Vec::new();
    let mut offsets = Vec::new();
    for (name, vals) in combo_features.iter().zip(&values) {
        offsets.push(feature_names.len());
        feature_names.extend(vals.iter().map(|v| format!("{name}={v}")));
    }
    let demographics = kept
        .iter()
        .enumerate()
        .map(|(id, (key, series, weight))| {
            let mut bits = vec![false; feature_names.len()];
            for (a, v) in key.iter().enumerate() {
                let idx = values[a].iter().position(|x| x == v).unwrap_or(0);
                bits[offsets[a] + idx] = true;
            }
            let label = combo_features
                .iter()
                .zip(key)
                .map(|(n, v)| format!("{n}={v}"))
                .collect::<Vec<_>>()
                .join(" ∧ ");
            Demographic {
                id,
                label,
                feature_vector: bits,
                weight: *weight,
                series: series.clone(),
            }
        })
        .collect();
    let mut dataset = Dataset::new(demographics, feature_names, (start, end))?;
    dataset.dropped_weight = dropped_weight;
    Ok(dataset)
}

/// Trailing moving average; prefix windows are shortened so the output keeps
/// the input length.
pub fn moving_average(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::param("window", "must be at least 1"));
    }
    if series.is_empty() {
        return Err(Error::Empty("series"));
    }
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for t in 0..series.len() {
        sum += series[t];
        if t >= window {
            sum -= series[t - window];
        }
        let count = (t + 1).min(window);
        out.push(if window == 1 {
            series[t]
        } else {
            sum / count as f64
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticParams {
    pub n_groups: usize,
    pub per_group: usize,
    pub length: usize,
    pub noise_sd: f64,
    pub feature_alignment: f64,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            n_groups: 4,
            per_group: 15,
            length: 48,
            noise_sd: 0.1,
            feature_alignment: 0.9,
            seed: 7,
        }
    }
}

/// A generated dataset with the group each demographic was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub groups: Vec<usize>,
}

/// Attribute names whose values encode the generating group.
pub const DISCRIMINATING_ATTRIBUTES: [&str; 2] = ["segment", "channel"];

fn trend_template(group: usize, t: f64) -> f64 {
    use std::f64::consts::PI;
    let step = |up: bool| if (t < 0.5) == up { 0.0 } else { 1.0 };
    match group {
        0 => t,
        1 => 1.0 - t,
        2 => step(true),
        3 => step(false),
        4 => 4.0 * (t - 0.5) * (t - 0.5),
        5 => 1.0 - 4.0 * (t - 0.5) * (t - 0.5),
        6 => 0.5 + 0.5 * (2.0 * PI * t).sin(),
        7 => 0.5 + 0.5 * (2.0 * PI * t).cos(),
        g => {
            let freq = (g - 6) as f64;
            0.5 + 0.5 * (2.0 * PI * freq * t).sin()
        }
    }
}

/// Generates groups of demographics sharing a trend template.
///
/// Each demographic carries two discriminating attributes (`segment`,
/// `channel`) that independently show the true group with probability
/// `feature_alignment` and a uniformly random group otherwise, plus two
/// nuisance attributes (`age`, `region`) that encode a seeded permutation of
/// the demographic index. The nuisance code makes every feature row unique, so
/// any labeling can be fit exactly by a deep enough tree.
pub fn gen_synthetic(params: &SyntheticParams) -> Result<SyntheticData> {
    let SyntheticParams {
        n_groups,
        per_group,
        length,
        noise_sd,
        feature_alignment,
        seed,
    } = *params;
    if n_groups < 2 {
        return Err(Error::param("n_groups", "must be at least 2"));
    }
    if per_group < 2 {
        return Err(Error::param("per_group", "must be at least 2"));
    }
    if length < 4 {
        return Err(Error::param("length", "must be at least 4"));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::param("noise_sd", "must be a non-negative real"));
    }
    if !(0.0..=1.0).contains(&feature_alignment) {
        return Err(Error::param("feature_alignment", "must lie in [0, 1]"));
    }

    let n = n_groups * per_group;
    let mut rng = seed::rng(seed);
    let noise = Normal::new(0.0, noise_sd.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::param("noise_sd", e.to_string()))?;

    let ages = (n as f64).sqrt().ceil() as usize;
    let regions = n.div_ceil(ages);
    let mut code: Vec<usize> = (0..n).collect();
    code.shuffle(&mut rng);

    let mut feature_names = Vec::new();
    for attr in DISCRIMINATING_ATTRIBUTES {
        feature_names.extend((0..n_groups).map(|g| format!("{attr}={g}")));
    }
    feature_names.extend((0..ages).map(|a| format!("age={a}")));
    feature_names.extend((0..regions).map(|r| format!("region={r}")));

    let mut demographics = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for (id, &code) in code.iter().enumerate() {
        let group = id / per_group;
        let scale = 50.0 + 150.0 * rng.random::<f64>();
        let series: Vec<f64> = (0..length)
            .map(|t| {
                let x = t as f64 / (length - 1) as f64;
                let eps = if noise_sd > 0.0 {
                    noise.sample(&mut rng)
                } else {
                    0.0
                };
                (scale * (1.0 + trend_template(group, x) + eps)).max(0.0)
            })
            .collect();

        let mut bits = vec![false; feature_names.len()];
        let mut parts = Vec::new();
        for (a, attr) in DISCRIMINATING_ATTRIBUTES.iter().enumerate() {
            let value = if rng.random::<f64>() < feature_alignment {
                group
            } else {
                rng.random_range(0..n_groups)
            };
            bits[a * n_groups + value] = true;
            parts.push(format!("{attr}={value}"));
        }
        let base = DISCRIMINATING_ATTRIBUTES.len() * n_groups;
        let (age, region) = (code % ages, code / ages);
        bits[base + age] = true;
        bits[base + ages + region] = true;
        parts.push(format!("age={age}"));
        parts.push(format!("region={region}"));

        let weight = series.iter().sum::<f64>().max(f64::MIN_POSITIVE);
        demographics.push(Demographic {
            id,
            label: parts.join(" ∧ "),
            feature_vector: bits,
            weight,
            series,
        });
        groups.push(group);
    }
    let dataset = Dataset::new(demographics, feature_names, (0, length as i64 - 1))?;
    Ok(SyntheticData { dataset, groups })
}

/// Writes a dataset back out as a temporal relation CSV (one row per
/// demographic-day), using the attribute values encoded in each label.
pub fn write_relation_csv<W: std::io::Write>(
    dataset: &Dataset,
    epoch: NaiveDate,
    out: W,
) -> Result<()> {
    let attrs: Vec<String> = dataset
        .demographics
        .first()
        .map(|d| {
            d.label
                .split(" ∧ ")
                .filter_map(|p| p.split_once('=').map(|(a, _)| a.to_string()))
                .collect()
        })
        .unwrap_or_default();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["date".to_string(), "amount".to_string()];
    header.extend(attrs.iter().cloned());
    w.write_record(&header)?;
    for d in &dataset.demographics {
        let values: Vec<&str> = d
            .label
            .split(" ∧ ")
            .filter_map(|p| p.split_once('=').map(|(_, v)| v))
            .collect();
        for (t, v) in d.series.iter().enumerate() {
            let date = epoch + chrono::Duration::days(dataset.date_range.0 + t as i64);
            let mut row = vec![date.format("%Y-%m-%d").to_string(), format!("{v}")];
            row.extend(values.iter().map(|s| s.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
