use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use super::sl::{load_models, save_models, FoldModels};
use super::Policy;
use crate::error::{Error, Result};
use crate::feedback::{output_cdfs, Cdf, Environment, EnvironmentView, FeedbackMatrix, WorkerSplit};
use crate::isotonic::nondecreasing;
use crate::nn::{kfold_fit, Dataset, Matrix, MlpConfig};
use crate::seed::derive_seed;

/// `B^(y) = (1[Y_k <= y])_k` for the first K workers, as 0/1 floats.
pub fn binarized_inputs(view: &EnvironmentView<'_>, unit: usize, k: usize, threshold: i32) -> Vec<f64> {
    view.raw_scores(unit, k)
        .into_iter()
        .map(|s| if s <= threshold { 1.0 } else { 0.0 })
        .collect()
}

/// Per-threshold estimates (one per non-top scale point) to a CDF:
/// nondecreasing projection, clamp to [0, 1], terminal 1.
pub fn project_to_cdf(raw: &[f64]) -> Result<Cdf> {
    let mut v = raw.to_vec();
    v.push(1.0);
    let mut v: Vec<f64> = nondecreasing(&v).into_iter().map(|x| x.clamp(0.0, 1.0)).collect();
    *v.last_mut().expect("nonempty") = 1.0;
    Cdf::new(v)
}

/// Supervised learning restricted to binarized feedback: one predictor per
/// threshold y sees only `B^(y)` and estimates `O_t(y)`.
#[derive(Clone, Debug)]
pub struct SlbPolicy {
    models: BTreeMap<(usize, usize, usize), FoldModels>,
}

impl SlbPolicy {
    pub fn fit(
        matrix: &FeedbackMatrix,
        split: &WorkerSplit,
        envs: &[Environment],
        ks: &[usize],
        template: &MlpConfig,
        folds: usize,
    ) -> Result<Self> {
        let targets = output_cdfs(matrix, split)?;
        let labels = matrix.scale().raw_labels().to_vec();
        let thresholds = labels.len() - 1;
        let n = matrix.num_units();
        let jobs: Vec<(&Environment, usize, usize)> = envs
            .iter()
            .flat_map(|e| ks.iter().flat_map(move |&k| (0..thresholds).map(move |j| (e, k, j))))
            .collect();
        let models = jobs
            .par_iter()
            .map(|&(env, k, j)| {
                let view = EnvironmentView::new(matrix, split, env)?;
                view.check_k(k)?;
                let inputs: Vec<f64> = (0..n).flat_map(|t| binarized_inputs(&view, t, k, labels[j])).collect();
                let tv: Vec<f64> = targets.iter().flat_map(|c| [c.values()[j], 1.0]).collect();
                let data = Dataset::new(Matrix::from_vec(n, k, inputs)?, Matrix::from_vec(n, 2, tv)?)?;
                let mut config = template.clone();
                config.input_dim = k;
                config.output_dim = 2;
                config.seed = derive_seed(template.seed, "slb", &[env.id as u64, k as u64, j as u64]);
                let cv = kfold_fit(&data, folds, &config)?;
                Ok((
                    (env.id, k, j),
                    FoldModels {
                        networks: cv.networks,
                        fold_of: cv.fold_of,
                    },
                ))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(Self { models })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        save_models(dir, "slb", &self.models)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let models = load_models(dir, "slb")?;
        for (&(_, k, _), m) in &models {
            if m.networks.iter().any(|n| n.config().input_dim != k || n.config().output_dim != 2) {
                return Err(Error::data(format!("{}: network shape does not fit K = {k}", dir.display())));
            }
        }
        Ok(Self { models })
    }
}

impl Policy for SlbPolicy {
    fn name(&self) -> &str {
        "slb"
    }

    fn predict(&self, view: &EnvironmentView<'_>, k: usize, unit: usize) -> Result<Cdf> {
        view.check_k(k)?;
        let labels = view.matrix.scale().raw_labels();
        let mut raw = Vec::with_capacity(labels.len() - 1);
        for (j, &y) in labels[..labels.len() - 1].iter().enumerate() {
            let models = self.models.get(&(view.env.id, k, j)).ok_or_else(|| {
                Error::NotTrained(format!(
                    "SL_b has no predictor for environment {}, K = {k}, threshold {y}",
                    view.env.id
                ))
            })?;
            let out = models.network_for(unit)?.predict_one(&binarized_inputs(view, unit, k, y))?;
            raw.push(out.values()[0]);
        }
        project_to_cdf(&raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::{split_workers, OrdinalScale};
    use proptest::prelude::*;

    #[test]
    fn projection_pools_violators() {
        let c = project_to_cdf(&[0.4, 0.3]).unwrap();
        assert!((c.values()[0] - 0.35).abs() < 1e-15);
        assert!((c.values()[1] - 0.35).abs() < 1e-15);
        assert_eq!(c.values()[2], 1.0);
    }

    #[test]
    fn projection_keeps_monotone_vectors() {
        let c = project_to_cdf(&[0.1, 0.2, 0.7]).unwrap();
        assert_eq!(c.values(), &[0.1, 0.2, 0.7, 1.0]);
    }

    #[test]
    fn binary_indicator_recovers_scores() {
        let m = FeedbackMatrix::new(
            vec![-1, 1, 1, -1],
            OrdinalScale::binary(),
            vec!["a".into()],
            (0..4).map(|i| i.to_string()).collect(),
            vec![],
        )
        .unwrap();
        let split = WorkerSplit::from_output_set(4, vec![3], 0).unwrap();
        let env = Environment::identity(0, 3);
        let view = EnvironmentView::new(&m, &split, &env).unwrap();
        let b = binarized_inputs(&view, 0, 3, -1);
        let recovered: Vec<i32> = b.iter().map(|&x| if x == 1.0 { -1 } else { 1 }).collect();
        assert_eq!(recovered, view.raw_scores(0, 3));
    }

    #[test]
    fn fit_predict_and_round_trip() {
        let mut scores = Vec::new();
        for t in 0..30 {
            for w in 0..6 {
                scores.push((t * 7 + w * 3) % 5 - 2);
            }
        }
        let m = FeedbackMatrix::new(
            scores,
            OrdinalScale::five_point(),
            (0..30).map(|i| i.to_string()).collect(),
            (0..6).map(|i| i.to_string()).collect(),
            vec![],
        )
        .unwrap();
        let split = split_workers(6, 2, 3).unwrap();
        let envs = vec![Environment::identity(0, 4)];
        let mut config = MlpConfig::for_granularity(crate::feedback::Granularity::Five, 1, 2);
        config.max_epochs = 3;
        let p = SlbPolicy::fit(&m, &split, &envs, &[2], &config, 5).unwrap();
        let view = EnvironmentView::new(&m, &split, &envs[0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        p.save(dir.path()).unwrap();
        let q = SlbPolicy::load(dir.path()).unwrap();
        for t in 0..30 {
            let c = p.predict(&view, 2, t).unwrap();
            assert_eq!(c.len(), 5);
            assert_eq!(c, q.predict(&view, 2, t).unwrap());
        }
        assert!(matches!(p.predict(&view, 3, 0), Err(Error::NotTrained(_))));
    }

    proptest! {
        #[test]
        fn projection_is_a_valid_cdf(raw in prop::collection::vec(-0.5f64..1.5, 1..12)) {
            let c = project_to_cdf(&raw).unwrap();
            prop_assert!(c.values().windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(c.values().iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert_eq!(*c.values().last().unwrap(), 1.0);
        }
    }
}
