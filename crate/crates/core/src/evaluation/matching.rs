use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_samples, BootstrapConfig};
use super::curve::column_means;
use super::LossCurve;
use crate::error::{Error, Result};
use crate::isotonic::nonincreasing;
use crate::stats::percentile_sorted;

/// For each reference K on the grid, the challenger K' with the same loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchingCurve {
    pub reference: String,
    pub challenger: String,
    pub grid: Vec<f64>,
    pub k_required: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    /// The challenger never reached the reference loss; `k_required` is K_max.
    pub unattained: Vec<bool>,
}

impl MatchingCurve {
    /// Interpolated `k_required` at reference K (e.g. 18).
    pub fn required_at(&self, k: f64) -> Option<f64> {
        interp(&self.grid, &self.k_required, k)
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(hi > lo) {
        return Err(Error::invalid(format!("grid needs n >= 2 and lo < hi, got n = {n}, [{lo}, {hi}]")));
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect())
}

/// Piecewise-linear interpolation; `None` outside `[xs[0], xs[last]]`.
fn interp(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    let last = xs.len().checked_sub(1)?;
    if x < xs[0] || x > xs[last] {
        return None;
    }
    if last == 0 {
        return Some(ys[0]);
    }
    let i = xs.partition_point(|&v| v <= x).clamp(1, last);
    let (x0, x1) = (xs[i - 1], xs[i]);
    Some(ys[i - 1] + (ys[i] - ys[i - 1]) * (x - x0) / (x1 - x0))
}

/// Smallest K' with `challenger(K') <= target` on the piecewise-linear
/// curve, or `(K_max, true)` when no such K' exists.
fn first_crossing(ks: &[f64], chall: &[f64], target: f64) -> (f64, bool) {
    if chall[0] <= target {
        return (ks[0], false);
    }
    for i in 1..ks.len() {
        if chall[i] <= target {
            let (c0, c1) = (chall[i - 1], chall[i]);
            let frac = (c0 - target) / (c0 - c1);
            return (ks[i - 1] + frac * (ks[i] - ks[i - 1]), false);
        }
    }
    (ks[ks.len() - 1], true)
}

/// Inverts mean-loss curves after nonincreasing repair: for each grid point
/// g, the first K' where the challenger's loss falls to the reference loss
/// at g.
pub fn invert_curves(k_values: &[usize], reference: &[f64], challenger: &[f64], grid: &[f64]) -> Result<(Vec<f64>, Vec<bool>)> {
    if k_values.len() < 2 || reference.len() != k_values.len() || challenger.len() != k_values.len() {
        return Err(Error::invalid("curves need matching lengths and at least two K values"));
    }
    let ks: Vec<f64> = k_values.iter().map(|&k| k as f64).collect();
    let r = nonincreasing(reference);
    let c = nonincreasing(challenger);
    let mut required = Vec::with_capacity(grid.len());
    let mut unattained = Vec::with_capacity(grid.len());
    for &g in grid {
        let target = interp(&ks, &r, g).ok_or_else(|| Error::invalid(format!("grid point {g} outside the K range")))?;
        let (k, miss) = first_crossing(&ks, &c, target);
        required.push(k);
        unattained.push(miss);
    }
    Ok((required, unattained))
}

/// Matching curve with bootstrap intervals. Each resample draws one set of
/// environments and reuses it for both policies; the interval is widened
/// where needed so it contains the point estimate.
pub fn matching_curve(
    reference: &LossCurve,
    challenger: &LossCurve,
    grid_size: usize,
    bootstrap: &BootstrapConfig,
) -> Result<MatchingCurve> {
    if reference.k_values != challenger.k_values {
        return Err(Error::invalid("reference and challenger curves use different K values"));
    }
    if reference.sorted_env_ids() != challenger.sorted_env_ids() {
        return Err(Error::invalid("reference and challenger curves use different environments"));
    }
    let ks = &reference.k_values;
    let grid = uniform_grid(ks[0] as f64, ks[ks.len() - 1] as f64, grid_size)?;
    let (k_required, unattained) = invert_curves(ks, &reference.mean_loss, &challenger.mean_loss, &grid)?;

    let ref_rows = reference.sorted_rows();
    let ch_rows = challenger.sorted_rows();
    let samples = bootstrap_samples(ref_rows.len(), bootstrap)?;
    let mut per_grid: Vec<Vec<f64>> = vec![Vec::with_capacity(samples.len()); grid.len()];
    for s in &samples {
        let (req, _) = invert_curves(ks, &column_means(&ref_rows, s), &column_means(&ch_rows, s), &grid)?;
        for (col, v) in per_grid.iter_mut().zip(req) {
            col.push(v);
        }
    }
    let (qlo, qhi) = bootstrap.quantiles();
    let mut ci_low = Vec::with_capacity(grid.len());
    let mut ci_high = Vec::with_capacity(grid.len());
    for (col, &k) in per_grid.iter_mut().zip(&k_required) {
        col.sort_by(f64::total_cmp);
        ci_low.push(percentile_sorted(col, qlo).min(k));
        ci_high.push(percentile_sorted(col, qhi).max(k));
    }
    Ok(MatchingCurve {
        reference: reference.policy.clone(),
        challenger: challenger.policy.clone(),
        grid,
        k_required,
        ci_low,
        ci_high,
        unattained,
    })
}

/// `K / K'`: how many times fewer individuals the challenger needs.
pub fn advantage(ref_k: f64, challenger_k: f64) -> Result<f64> {
    if !(ref_k > 0.0 && challenger_k > 0.0) {
        return Err(Error::invalid(format!("advantage needs positive K values, got {ref_k} and {challenger_k}")));
    }
    Ok(ref_k / challenger_k)
}
