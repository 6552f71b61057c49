use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{Evaluation, Evaluator};

// Slack for comparing alpha widths produced by repeated halving.
const WIDTH_EPS: f64 = 1e-12;

/// An axis-aligned `(k, alpha)` search region, inclusive on both axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub k_lo: usize,
    pub k_hi: usize,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
}

impl Region {
    pub fn new(k_lo: usize, k_hi: usize, alpha_lo: f64, alpha_hi: f64) -> Result<Self> {
        if k_lo > k_hi || k_lo == 0 {
            return Err(Error::param("k", format!("bad range [{k_lo}, {k_hi}]")));
        }
        if !(0.0..=1.0).contains(&alpha_lo)
            || !(0.0..=1.0).contains(&alpha_hi)
            || alpha_lo > alpha_hi
        {
            return Err(Error::param(
                "alpha",
                format!("bad range [{alpha_lo}, {alpha_hi}]"),
            ));
        }
        Ok(Self {
            k_lo,
            k_hi,
            alpha_lo,
            alpha_hi,
        })
    }

    pub fn alpha_width(&self) -> f64 {
        self.alpha_hi - self.alpha_lo
    }

    /// Neither axis can be split further: a single `k` and an alpha width at
    /// or below `delta_alpha`.
    pub fn is_atomic(&self, delta_alpha: f64) -> bool {
        self.k_lo == self.k_hi && self.alpha_width() <= delta_alpha + WIDTH_EPS
    }

    pub fn contains(&self, k: usize, alpha: f64) -> bool {
        (self.k_lo..=self.k_hi).contains(&k) && alpha >= self.alpha_lo && alpha <= self.alpha_hi
    }
}

/// A region with its objective bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub id: usize,
    pub region: Region,
    pub lower: f64,
    pub upper: f64,
    /// The evaluated corner whose objective is `upper`.
    pub witness: Evaluation,
}

/// Bounds from the two anti-diagonal corners `(k_hi, alpha_lo)` and
/// `(k_lo, alpha_hi)`:
///
/// * lower = `D(k_hi, alpha_lo) + lambda * N(k_lo, alpha_hi)`, the smallest
///   `D` and smallest `N` in the block when `D` falls with `k` and rises with
///   `alpha` and `N` does the opposite;
/// * upper = the better of the two corner objectives.
///
/// The lower bound is capped at the upper bound, which is an achieved value,
/// so `lower <= upper` holds even where monotonicity fails.
pub fn compute_bounds(id: usize, region: Region, ev: &Evaluator, lambda: f64) -> Result<Block> {
    let (bottom_right, top_left) = rayon::join(
        || ev.evaluate(region.k_hi, region.alpha_lo, lambda),
        || ev.evaluate(region.k_lo, region.alpha_hi, lambda),
    );
    let (bottom_right, top_left) = (bottom_right?, top_left?);
    let lower = bottom_right.d + lambda * top_left.n;
    let witness = if top_left.objective < bottom_right.objective {
        top_left
    } else {
        bottom_right
    };
    let upper = witness.objective;
    Ok(Block {
        id,
        region,
        lower: lower.min(upper),
        upper,
        witness,
    })
}

/// Splits along the longer normalized side.
///
/// `k` ranges split at the midpoint value, shared by both halves; a width-one
/// `k` range splits into its two single values. Alpha ranges are halved. A
/// side that is already atomic is never chosen.
pub fn split(
    region: &Region,
    k_min: usize,
    k_max: usize,
    delta_alpha: f64,
) -> Result<(Region, Region)> {
    let k_span = k_max.saturating_sub(k_min);
    let k_width = if k_span == 0 {
        0.0
    } else {
        (region.k_hi - region.k_lo) as f64 / k_span as f64
    };
    let a_width = region.alpha_width();
    let k_ok = region.k_hi > region.k_lo;
    let a_ok = a_width > delta_alpha + WIDTH_EPS;
    if !k_ok && !a_ok {
        return Err(Error::InvalidInput(format!("block {region:?} is atomic")));
    }
    if k_ok && (k_width > a_width || !a_ok) {
        let (left, right) = if region.k_hi - region.k_lo >= 2 {
            let mid = (region.k_lo + region.k_hi) / 2;
            ((region.k_lo, mid), (mid, region.k_hi))
        } else {
            ((region.k_lo, region.k_lo), (region.k_hi, region.k_hi))
        };
        Ok((
            Region {
                k_lo: left.0,
                k_hi: left.1,
                ..*region
            },
            Region {
                k_lo: right.0,
                k_hi: right.1,
                ..*region
            },
        ))
    } else {
        let mid = 0.5 * (region.alpha_lo + region.alpha_hi);
        Ok((
            Region {
                alpha_hi: mid,
                ..*region
            },
            Region {
                alpha_lo: mid,
                ..*region
            },
        ))
    }
}
