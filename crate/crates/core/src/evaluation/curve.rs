use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::{output_cdfs, Environment, EnvironmentView, FeedbackMatrix, WorkerSplit};
use crate::losses::LossKind;
use crate::policies::Policy;

/// Mean loss per (environment, K) and its column means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub policy: String,
    pub k_values: Vec<usize>,
    pub env_ids: Vec<usize>,
    /// `per_env_loss[e][i]`: mean over units for environment `env_ids[e]` at `k_values[i]`.
    pub per_env_loss: Vec<Vec<f64>>,
    pub mean_loss: Vec<f64>,
}

impl LossCurve {
    pub fn new(policy: impl Into<String>, k_values: Vec<usize>, env_ids: Vec<usize>, per_env_loss: Vec<Vec<f64>>) -> Result<Self> {
        if k_values.is_empty() || env_ids.is_empty() {
            return Err(Error::invalid("a loss curve needs at least one K and one environment"));
        }
        if k_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("K values must be strictly ascending"));
        }
        if per_env_loss.len() != env_ids.len() || per_env_loss.iter().any(|r| r.len() != k_values.len()) {
            return Err(Error::invalid("per-environment losses do not match the curve shape"));
        }
        if per_env_loss.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("loss curve contains a non-finite value"));
        }
        let mean_loss = column_means(&per_env_loss, &(0..env_ids.len()).collect::<Vec<_>>());
        Ok(Self {
            policy: policy.into(),
            k_values,
            env_ids,
            per_env_loss,
            mean_loss,
        })
    }

    /// Rows sorted by environment id.
    pub(crate) fn sorted_rows(&self) -> Vec<&[f64]> {
        let mut order: Vec<usize> = (0..self.env_ids.len()).collect();
        order.sort_by_key(|&i| self.env_ids[i]);
        order.into_iter().map(|i| self.per_env_loss[i].as_slice()).collect()
    }

    pub(crate) fn sorted_env_ids(&self) -> Vec<usize> {
        let mut ids = self.env_ids.clone();
        ids.sort_unstable();
        ids
    }
}

pub(crate) fn column_means<R: AsRef<[f64]>>(rows: &[R], picks: &[usize]) -> Vec<f64> {
    let width = rows[0].as_ref().len();
    let mut acc = vec![0.0; width];
    for &p in picks {
        for (a, v) in acc.iter_mut().zip(rows[p].as_ref()) {
            *a += v;
        }
    }
    acc.into_iter().map(|a| a / picks.len() as f64).collect()
}

/// Evaluates `policy` on every (environment, K): the mean over units of
/// `loss(O_t, prediction)`.
pub fn run_experiment(
    matrix: &FeedbackMatrix,
    split: &WorkerSplit,
    envs: &[Environment],
    policy: &dyn Policy,
    k_values: &[usize],
    loss: LossKind,
) -> Result<LossCurve> {
    if envs.is_empty() {
        return Err(Error::invalid("no evaluation environments"));
    }
    for &k in k_values {
        if k == 0 || k > split.input_len() {
            return Err(Error::invalid(format!("K = {k} outside 1..={}", split.input_len())));
        }
    }
    let targets = output_cdfs(matrix, split)?;
    let scale = matrix.scale();
    let cells: Vec<(usize, usize)> = (0..envs.len()).flat_map(|e| (0..k_values.len()).map(move |i| (e, i))).collect();
    let values = cells
        .par_iter()
        .map(|&(e, i)| {
            let view = EnvironmentView::new(matrix, split, &envs[e])?;
            let k = k_values[i];
            let mut total = 0.0;
            for (t, target) in targets.iter().enumerate() {
                let pred = policy.predict(&view, k, t)?;
                total += loss.evaluate(scale, target, &pred)?;
            }
            Ok(total / targets.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let per_env_loss = values.chunks(k_values.len()).map(<[f64]>::to_vec).collect();
    LossCurve::new(
        policy.name(),
        k_values.to_vec(),
        envs.iter().map(|e| e.id).collect(),
        per_env_loss,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::{sample_environments, Cdf, EnvRole, OrdinalScale};
    use crate::policies::RegAvgPolicy;

    #[test]
    fn mean_is_column_mean() {
        let c = LossCurve::new("x", vec![1, 2], vec![3, 1], vec![vec![1.0, 2.0], vec![3.0, 5.0]]).unwrap();
        assert_eq!(c.mean_loss, vec![2.0, 3.5]);
        assert_eq!(c.sorted_rows()[0], &[3.0, 5.0]);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(LossCurve::new("x", vec![2, 1], vec![0], vec![vec![1.0, 1.0]]).is_err());
        assert!(LossCurve::new("x", vec![1], vec![0], vec![vec![f64::NAN]]).is_err());
        assert!(LossCurve::new("x", vec![1], vec![0, 1], vec![vec![1.0]]).is_err());
    }

    #[test]
    fn matched_degenerate_world_has_zero_loss() {
        // Input workers duplicate output workers, so the full input empirical
        // CDF equals the {0,1}-valued output CDF.
        let (units, l) = (6, 3);
        let mut scores = Vec::new();
        for t in 0..units {
            let s = if t % 2 == 0 { 1 } else { -1 };
            scores.extend(std::iter::repeat_n(s, 2 * l));
        }
        let m = FeedbackMatrix::new(
            scores,
            OrdinalScale::binary(),
            (0..units).map(|i| i.to_string()).collect(),
            (0..2 * l).map(|i| i.to_string()).collect(),
            vec![],
        )
        .unwrap();
        let split = WorkerSplit::from_output_set(2 * l, (l..2 * l).collect(), 0).unwrap();
        let envs = sample_environments(l, 4, 9, EnvRole::Eval).unwrap();
        let policy = RegAvgPolicy::constant(Cdf::new(vec![0.5, 1.0]).unwrap(), 0.0, 1..=l);
        let curve = run_experiment(&m, &split, &envs, &policy, &[1, 2, 3], LossKind::CumulativeLog).unwrap();
        assert_eq!(curve.per_env_loss.len(), 4);
        assert!(curve.per_env_loss.iter().all(|r| r.len() == 3));
        assert!(curve.mean_loss.iter().all(|&v| v.abs() < 1e-9));
        assert!(run_experiment(&m, &split, &envs, &policy, &[4], LossKind::CumulativeLog).is_err());
    }
}
