//! Maximum mean discrepancy with an RBF kernel.
//!
//! Kernel sums are accumulated as fixed-point integers (each value scaled by
//! 2^62 and rounded), which makes every sum independent of summation order:
//! MMD²(X, Y) and MMD²(Y, X) are bit-identical, and so are results under any
//! permutation of the inputs or any thread count.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::StructuralError;

const FIXED_SCALE: f64 = (1u64 << 62) as f64;
const MEDIAN_EXACT_LIMIT: usize = 3000;
const MIN_WIDTH: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingMode {
    Fixed,
    #[default]
    MedianHeuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmdConfig {
    /// Kernel width `v`; used when `smoothing_mode` is `fixed`.
    pub smoothing: f64,
    pub smoothing_mode: SmoothingMode,
}

impl Default for MmdConfig {
    fn default() -> Self {
        Self { smoothing: 1.0, smoothing_mode: SmoothingMode::MedianHeuristic }
    }
}

impl MmdConfig {
    pub fn fixed(v: f64) -> Self {
        Self { smoothing: v, smoothing_mode: SmoothingMode::Fixed }
    }

    pub fn validate(&self) -> Result<(), StructuralError> {
        if self.smoothing_mode == SmoothingMode::Fixed && !(self.smoothing > 0.0 && self.smoothing.is_finite()) {
            return Err(StructuralError::InvalidSmoothing(self.smoothing));
        }
        Ok(())
    }
}

pub fn rbf_kernel(x: &[f64], y: &[f64], v: f64) -> Result<f64, StructuralError> {
    if x.len() != y.len() {
        return Err(StructuralError::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    if !(v > 0.0) {
        return Err(StructuralError::InvalidSmoothing(v));
    }
    Ok(kernel(x, y, v))
}

#[inline]
fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[inline]
fn kernel(x: &[f64], y: &[f64], v: f64) -> f64 {
    (-sq_dist(x, y) / (2.0 * v * v)).exp()
}

/// Distinct points with multiplicities, sorted lexicographically.
struct Weighted {
    points: Vec<Vec<f64>>,
    counts: Vec<u64>,
    total: u64,
}

fn canonical_bits(p: &[f64]) -> Vec<u64> {
    // -0.0 and 0.0 are the same sample
    p.iter().map(|x| if *x == 0.0 { 0 } else { x.to_bits() }).collect()
}

fn dedup(samples: &[Vec<f64>]) -> Weighted {
    let mut map: HashMap<Vec<u64>, (usize, u64)> = HashMap::new();
    for (i, s) in samples.iter().enumerate() {
        map.entry(canonical_bits(s)).or_insert((i, 0)).1 += 1;
    }
    let mut pairs: Vec<(Vec<f64>, u64)> = map.into_values().map(|(i, c)| (samples[i].clone(), c)).collect();
    pairs.sort_by(|a, b| {
        a.0.iter().zip(&b.0).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    let total = samples.len() as u64;
    let (points, counts) = pairs.into_iter().unzip();
    Weighted { points, counts, total }
}

fn fixed(k: f64) -> i128 {
    (k * FIXED_SCALE).round() as i128
}

/// Σ_i Σ_j c_i c_j k(a_i, b_j) in fixed point.
fn cross_sum(a: &Weighted, b: &Weighted, v: f64) -> i128 {
    a.points
        .par_iter()
        .zip(a.counts.par_iter())
        .map(|(p, &cp)| {
            let mut acc: i128 = 0;
            for (q, &cq) in b.points.iter().zip(&b.counts) {
                acc += fixed(kernel(p, q, v)) * i128::from(cp) * i128::from(cq);
            }
            acc
        })
        .sum()
}

fn check(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<(), StructuralError> {
    if x.is_empty() || y.is_empty() {
        return Err(StructuralError::EmptySample);
    }
    let dim = x[0].len();
    for s in x.iter().chain(y) {
        if s.len() != dim {
            return Err(StructuralError::DimensionMismatch { expected: dim, found: s.len() });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(StructuralError::NonFinite);
        }
    }
    Ok(())
}

/// Weighted median of pairwise (i < j) distances over the pooled multiset.
fn median_width(x: &Weighted, y: &Weighted) -> f64 {
    let mut pooled: Vec<(Vec<f64>, u64)> = Vec::new();
    let mut merged: HashMap<Vec<u64>, usize> = HashMap::new();
    for w in [x, y] {
        for (p, c) in w.points.iter().zip(&w.counts) {
            match merged.get(&canonical_bits(p)) {
                Some(&i) => pooled[i].1 += c,
                None => {
                    merged.insert(canonical_bits(p), pooled.len());
                    pooled.push((p.clone(), *c));
                }
            }
        }
    }
    pooled.sort_by(|a, b| {
        a.0.iter().zip(&b.0).map(|(s, t)| s.total_cmp(t)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    if pooled.len() > MEDIAN_EXACT_LIMIT {
        let stride = pooled.len() as f64 / MEDIAN_EXACT_LIMIT as f64;
        pooled = (0..MEDIAN_EXACT_LIMIT).map(|i| pooled[(i as f64 * stride) as usize].clone()).collect();
    }

    let mut dists: Vec<(f64, u128)> = Vec::new();
    for (i, (p, cp)) in pooled.iter().enumerate() {
        let cp = u128::from(*cp);
        if cp > 1 {
            dists.push((0.0, cp * (cp - 1) / 2));
        }
        for (q, cq) in &pooled[i + 1..] {
            dists.push((sq_dist(p, q).sqrt(), cp * u128::from(*cq)));
        }
    }
    let total: u128 = dists.iter().map(|d| d.1).sum();
    if total == 0 {
        return MIN_WIDTH;
    }
    dists.sort_by(|a, b| a.0.total_cmp(&b.0));
    let at_rank = |r: u128| {
        let mut seen = 0u128;
        for (d, c) in &dists {
            seen += c;
            if seen > r {
                return *d;
            }
        }
        dists.last().unwrap().0
    };
    let median = 0.5 * (at_rank((total - 1) / 2) + at_rank(total / 2));
    median.max(MIN_WIDTH)
}

/// Kernel width resolved for this pair of sample sets.
pub fn resolve_width(x: &[Vec<f64>], y: &[Vec<f64>], config: &MmdConfig) -> Result<f64, StructuralError> {
    config.validate()?;
    check(x, y)?;
    Ok(match config.smoothing_mode {
        SmoothingMode::Fixed => config.smoothing,
        SmoothingMode::MedianHeuristic => median_width(&dedup(x), &dedup(y)),
    })
}

/// The three-term MMD² estimate before clamping at zero.
pub fn mmd_squared_raw(x: &[Vec<f64>], y: &[Vec<f64>], config: &MmdConfig) -> Result<f64, StructuralError> {
    config.validate()?;
    check(x, y)?;
    let wx = dedup(x);
    let wy = dedup(y);
    let v = match config.smoothing_mode {
        SmoothingMode::Fixed => config.smoothing,
        SmoothingMode::MedianHeuristic => median_width(&wx, &wy),
    };
    let kxx = cross_sum(&wx, &wx, v) as f64 / FIXED_SCALE;
    let kyy = cross_sum(&wy, &wy, v) as f64 / FIXED_SCALE;
    let kxy = cross_sum(&wx, &wy, v) as f64 / FIXED_SCALE;
    let n = wx.total as f64;
    let m = wy.total as f64;
    Ok(kxx / (n * n) + kyy / (m * m) - 2.0 * kxy / (n * m))
}

pub fn mmd_squared(x: &[Vec<f64>], y: &[Vec<f64>], config: &MmdConfig) -> Result<f64, StructuralError> {
    Ok(mmd_squared_raw(x, y, config)?.max(0.0))
}

/// Convenience for one-dimensional samples.
pub fn mmd_squared_scalar(x: &[f64], y: &[f64], config: &MmdConfig) -> Result<f64, StructuralError> {
    let wrap = |s: &[f64]| s.iter().map(|v| vec![*v]).collect::<Vec<_>>();
    mmd_squared(&wrap(x), &wrap(y), config)
}
