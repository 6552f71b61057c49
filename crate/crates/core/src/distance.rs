//! Distance kernels and the alpha-blended combined distance.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Pairwise dissimilarity over `0..len()`.
pub trait Dissimilarity: Sync {
    fn len(&self) -> usize;
    fn get(&self, i: usize, j: usize) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Builds a symmetric matrix with zero diagonal from an upper-triangle
    /// kernel, evaluating pairs in parallel.
    pub fn symmetric_from_fn<F>(n: usize, f: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> Result<f64> + Sync,
    {
        let upper: Vec<(usize, usize, f64)> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| f(i, j).map(|d| (i, j, d)))
            .collect::<Result<_>>()?;
        let mut m = Self::zeros(n);
        for (i, j, d) in upper {
            m.data[i * n + j] = d;
            m.data[j * n + i] = d;
        }
        Ok(m)
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::LengthMismatch {
                    left: n,
                    right: r.len(),
                });
            }
            data.extend(r);
        }
        Ok(Self { n, data })
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Writes `n,<n>,metric,<name>` followed by one CSV line per row.
    pub fn write_csv<W: Write>(&self, metric: &str, mut out: W) -> Result<()> {
        writeln!(out, "n,{},metric,{metric}", self.n)?;
        for i in 0..self.n {
            let line = self
                .row(i)
                .iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join(",");
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

impl Dissimilarity for DenseMatrix {
    fn len(&self) -> usize {
        self.n
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

/// Adapter turning any `Fn(i, j) -> f64` into a [`Dissimilarity`].
pub struct FnDissimilarity<F> {
    n: usize,
    f: F,
}

impl<F: Fn(usize, usize) -> f64 + Sync> FnDissimilarity<F> {
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f }
    }
}

impl<F: Fn(usize, usize) -> f64 + Sync> Dissimilarity for FnDissimilarity<F> {
    fn len(&self) -> usize {
        self.n
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        (self.f)(i, j)
    }
}

/// Dynamic time warping with local cost `|a_i - b_j|`, no window and no
/// path-length normalization.
pub fn dtw_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("dtw input series"));
    }
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for &x in a {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            let best = prev[j - 1].min(prev[j]).min(cur[j - 1]);
            cur[j] = (x - b[j - 1]).abs() + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// `1 - |a ∧ b| / |a ∨ b|` over binary vectors.
pub fn jaccard_distance(a: &[bool], b: &[bool]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    if union == 0 {
        return Err(Error::UndefinedDistance("jaccard of two all-zero vectors"));
    }
    Ok(1.0 - inter as f64 / union as f64)
}

/// `1 - cos(a, b)` over binary vectors.
pub fn cosine_distance(a: &[bool], b: &[bool]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let dot = a.iter().zip(b).filter(|(&x, &y)| x && y).count() as f64;
    let na = a.iter().filter(|&&x| x).count() as f64;
    let nb = b.iter().filter(|&&x| x).count() as f64;
    if na == 0.0 || nb == 0.0 {
        return Err(Error::UndefinedDistance("cosine with an all-zero vector"));
    }
    Ok((1.0 - dot / (na * nb).sqrt()).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AccuracyMetric {
    #[default]
    Dtw,
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ExplainMetric {
    #[default]
    Jaccard,
    Cosine,
}

impl fmt::Display for AccuracyMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AccuracyMetric::Dtw => "dtw",
            AccuracyMetric::Euclidean => "euclidean",
        })
    }
}

impl fmt::Display for ExplainMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExplainMetric::Jaccard => "jaccard",
            ExplainMetric::Cosine => "cosine",
        })
    }
}

/// Which distance `alpha` weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaOrientation {
    /// `(1 - alpha) * a + alpha * e`
    #[default]
    Explainability,
    /// `alpha * a + (1 - alpha) * e`
    Trend,
}

/// Precomputed pairwise accuracy (trend) and explainability (feature)
/// distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceContext {
    pub a_matrix: DenseMatrix,
    pub e_matrix: DenseMatrix,
    pub a_max: f64,
    pub e_max: f64,
    pub a_metric: AccuracyMetric,
    pub e_metric: ExplainMetric,
    pub orientation: AlphaOrientation,
    /// Set when a matrix maximum was zero and the divisor was replaced by 1.
    pub degenerate: bool,
}

impl DistanceContext {
    pub fn from_matrices(
        a_matrix: DenseMatrix,
        e_matrix: DenseMatrix,
        a_metric: AccuracyMetric,
        e_metric: ExplainMetric,
    ) -> Result<Self> {
        if a_matrix.len() != e_matrix.len() {
            return Err(Error::LengthMismatch {
                left: a_matrix.len(),
                right: e_matrix.len(),
            });
        }
        let (a_max, e_max) = (a_matrix.max(), e_matrix.max());
        let degenerate = a_max == 0.0 || e_max == 0.0;
        if degenerate {
            log::warn!("degenerate distance maxima (a_max={a_max}, e_max={e_max}); dividing by 1");
        }
        Ok(Self {
            a_matrix,
            e_matrix,
            a_max,
            e_max,
            a_metric,
            e_metric,
            orientation: AlphaOrientation::default(),
            degenerate,
        })
    }

    pub fn with_orientation(mut self, orientation: AlphaOrientation) -> Self {
        self.orientation = orientation;
        self
    }

    pub fn len(&self) -> usize {
        self.a_matrix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn divisors(&self) -> (f64, f64) {
        let fix = |m: f64| if m > 0.0 { m } else { 1.0 };
        (fix(self.a_max), fix(self.e_max))
    }

    /// Normalized blend of the two distances for the pair `(i, j)`.
    #[inline]
    pub fn combined_distance(&self, i: usize, j: usize, alpha: f64) -> f64 {
        let (da, de) = self.divisors();
        let a = self.a_matrix.get(i, j) / da;
        let e = self.e_matrix.get(i, j) / de;
        match self.orientation {
            AlphaOrientation::Explainability => (1.0 - alpha) * a + alpha * e,
            AlphaOrientation::Trend => alpha * a + (1.0 - alpha) * e,
        }
    }

    /// Materializes the combined distance for one `alpha`.
    pub fn blended(&self, alpha: f64) -> Result<DenseMatrix> {
        check_alpha(alpha)?;
        let n = self.len();
        let mut m = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = self.combined_distance(i, j, alpha);
            }
        }
        Ok(m)
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::param("alpha", format!("{alpha} outside [0, 1]")))
    }
}

pub fn build_context(
    dataset: &Dataset,
    a_metric: AccuracyMetric,
    e_metric: ExplainMetric,
) -> Result<DistanceContext> {
    let n = dataset.len();
    if n < 2 {
        return Err(Error::param(
            "dataset",
            format!("need at least 2 demographics, got {n}"),
        ));
    }
    let d = &dataset.demographics;
    let a_matrix = DenseMatrix::symmetric_from_fn(n, |i, j| match a_metric {
        AccuracyMetric::Dtw => dtw_distance(&d[i].series, &d[j].series),
        AccuracyMetric::Euclidean => euclidean_distance(&d[i].series, &d[j].series),
    })?;
    let e_matrix = DenseMatrix::symmetric_from_fn(n, |i, j| match e_metric {
        ExplainMetric::Jaccard => jaccard_distance(&d[i].feature_vector, &d[j].feature_vector),
        ExplainMetric::Cosine => cosine_distance(&d[i].feature_vector, &d[j].feature_vector),
    })?;
    DistanceContext::from_matrices(a_matrix, e_matrix, a_metric, e_metric)
}
