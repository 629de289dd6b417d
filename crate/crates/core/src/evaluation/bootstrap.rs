use rand::Rng;
use serde::{Deserialize, Serialize};

use super::curve::column_means;
use super::LossCurve;
use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::stats::percentile_sorted;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub confidence: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            resamples: 1000,
            confidence: 0.95,
            seed: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resamples == 0 {
            return Err(Error::invalid("bootstrap needs at least one resample"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::invalid(format!("confidence must lie in (0, 1), got {}", self.confidence)));
        }
        Ok(())
    }

    pub(crate) fn quantiles(&self) -> (f64, f64) {
        let a = (1.0 - self.confidence) / 2.0;
        (a, 1.0 - a)
    }
}

/// Row indices (into environments sorted by id) for every resample.
pub fn bootstrap_samples(num_envs: usize, config: &BootstrapConfig) -> Result<Vec<Vec<usize>>> {
    config.validate()?;
    if num_envs == 0 {
        return Err(Error::invalid("bootstrap needs at least one environment"));
    }
    let mut rng = rng_for(config.seed, "bootstrap", &[num_envs as u64]);
    Ok((0..config.resamples)
        .map(|_| (0..num_envs).map(|_| rng.random_range(0..num_envs)).collect())
        .collect())
}

/// Percentile interval of the mean loss at each K, resampling environments
/// with replacement.
pub fn bootstrap_ci(curve: &LossCurve, config: &BootstrapConfig) -> Result<Vec<(f64, f64)>> {
    let rows = curve.sorted_rows();
    let samples = bootstrap_samples(rows.len(), config)?;
    let means: Vec<Vec<f64>> = samples.iter().map(|s| column_means(&rows, s)).collect();
    let (lo, hi) = config.quantiles();
    Ok((0..curve.k_values.len())
        .map(|i| {
            let mut col: Vec<f64> = means.iter().map(|m| m[i]).collect();
            col.sort_by(f64::total_cmp);
            (percentile_sorted(&col, lo), percentile_sorted(&col, hi))
        })
        .collect())
}
