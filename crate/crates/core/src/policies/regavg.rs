use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Policy;
use crate::error::{Error, Result};
use crate::feedback::{empirical_cdf, output_cdfs, Cdf, Environment, EnvironmentView, FeedbackMatrix, OrdinalScale, WorkerSplit};
use crate::losses::LossKind;

/// Candidate regularization weights, tried for every K.
pub const GAMMA_GRID: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// `Q(y) = gamma Q0(y) + (1 - gamma) * (1/K) sum_k 1[Y_k <= y]`.
pub fn regavg_predict(q0: &Cdf, gamma: f64, scores: &[i32], scale: &OrdinalScale) -> Result<Cdf> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::invalid(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    if q0.len() != scale.len() {
        return Err(Error::invalid("prior CDF and scale have different lengths"));
    }
    let emp = empirical_cdf(scores, scale)?;
    let values = q0
        .values()
        .iter()
        .zip(emp.values())
        .map(|(p, e)| gamma * p + (1.0 - gamma) * e)
        .collect();
    Cdf::new(values)
}

/// Regularized averaging with a per-K weight toward the prior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegAvgPolicy {
    pub q0: Cdf,
    pub gammas: BTreeMap<usize, f64>,
}

impl RegAvgPolicy {
    pub fn new(q0: Cdf, gammas: BTreeMap<usize, f64>) -> Self {
        Self { q0, gammas }
    }

    /// One gamma for every K.
    pub fn constant(q0: Cdf, gamma: f64, ks: impl IntoIterator<Item = usize>) -> Self {
        Self {
            q0,
            gammas: ks.into_iter().map(|k| (k, gamma)).collect(),
        }
    }
}

impl Policy for RegAvgPolicy {
    fn name(&self) -> &str {
        "regavg"
    }

    fn predict(&self, view: &EnvironmentView<'_>, k: usize, unit: usize) -> Result<Cdf> {
        view.check_k(k)?;
        let gamma = *self
            .gammas
            .get(&k)
            .ok_or_else(|| Error::NotTrained(format!("no tuned gamma for K = {k}")))?;
        regavg_predict(&self.q0, gamma, &view.raw_scores(unit, k), view.matrix.scale())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GammaTuneResult {
    pub per_k_gamma: BTreeMap<usize, f64>,
    pub per_k_train_loss: BTreeMap<usize, f64>,
}

impl GammaTuneResult {
    pub fn merge(&mut self, other: GammaTuneResult) {
        self.per_k_gamma.extend(other.per_k_gamma);
        self.per_k_train_loss.extend(other.per_k_train_loss);
    }
}

/// Picks, for one K, the gamma in `grid` with the lowest mean loss over
/// (train environment x unit). Ties go to the larger gamma.
pub fn tune_gamma(
    matrix: &FeedbackMatrix,
    split: &WorkerSplit,
    q0: &Cdf,
    train_envs: &[Environment],
    k: usize,
    loss: LossKind,
    grid: &[f64],
) -> Result<GammaTuneResult> {
    if train_envs.is_empty() {
        return Err(Error::invalid("gamma tuning needs at least one train environment"));
    }
    if grid.is_empty() {
        return Err(Error::invalid("empty gamma grid"));
    }
    let targets = output_cdfs(matrix, split)?;
    let scale = matrix.scale();
    let views = train_envs
        .iter()
        .map(|e| EnvironmentView::new(matrix, split, e))
        .collect::<Result<Vec<_>>>()?;
    for v in &views {
        v.check_k(k)?;
    }
    let mut sorted_grid = grid.to_vec();
    sorted_grid.sort_by(f64::total_cmp);

    let mut best: Option<(f64, f64)> = None;
    for &gamma in &sorted_grid {
        let mut total = 0.0;
        let mut count = 0usize;
        for view in &views {
            for (t, target) in targets.iter().enumerate() {
                let pred = regavg_predict(q0, gamma, &view.raw_scores(t, k), scale)?;
                total += loss.evaluate(scale, target, &pred)?;
                count += 1;
            }
        }
        let mean = total / count as f64;
        // `<=` with an ascending grid breaks ties toward larger gamma
        if best.is_none_or(|(l, _)| mean <= l) {
            best = Some((mean, gamma));
        }
    }
    let (loss_at_best, gamma) = best.expect("grid is nonempty");
    Ok(GammaTuneResult {
        per_k_gamma: BTreeMap::from([(k, gamma)]),
        per_k_train_loss: BTreeMap::from([(k, loss_at_best)]),
    })
}
