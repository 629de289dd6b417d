use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Policy;
use crate::error::{Error, Result};
use crate::feedback::{Cdf, Environment, EnvironmentView, FeedbackMatrix, WorkerSplit};
use crate::nn::{kfold_fit, load_checkpoint, save_checkpoint, Dataset, Matrix, MlpConfig, Network};
use crate::seed::derive_seed;

/// Training pairs for one (environment, K): normalized first-K scores and
/// the output-set CDF of every unit.
pub fn sl_dataset(view: &EnvironmentView<'_>, k: usize, targets: &[Cdf]) -> Result<Dataset> {
    view.check_k(k)?;
    let n = view.matrix.num_units();
    if targets.len() != n {
        return Err(Error::invalid("one target CDF per unit is required"));
    }
    let inputs: Vec<f64> = (0..n).flat_map(|t| view.normalized_scores(t, k)).collect();
    let width = targets.first().map_or(0, Cdf::len);
    let tv: Vec<f64> = targets.iter().flat_map(|c| c.values().iter().copied()).collect();
    Dataset::new(Matrix::from_vec(n, k, inputs)?, Matrix::from_vec(n, width, tv)?)
}

/// Fold networks for one trained slot and which fold holds each unit out.
#[derive(Clone, Debug)]
pub(crate) struct FoldModels {
    pub networks: Vec<Network>,
    pub fold_of: Vec<usize>,
}

impl FoldModels {
    pub fn network_for(&self, unit: usize) -> Result<&Network> {
        self.fold_of
            .get(unit)
            .map(|&f| &self.networks[f])
            .ok_or_else(|| Error::invalid(format!("unit {unit} was not in the training data")))
    }
}

#[derive(Serialize, Deserialize)]
struct IndexEntry {
    env: usize,
    k: usize,
    slot: usize,
    folds: usize,
    fold_of: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Index {
    policy: String,
    entries: Vec<IndexEntry>,
}

type Key = (usize, usize, usize);

fn file_name(env: usize, k: usize, slot: usize, fold: usize) -> String {
    format!("env{env}_k{k}_s{slot}_fold{fold}.json")
}

pub(crate) fn save_models(dir: &Path, policy: &str, models: &BTreeMap<Key, FoldModels>) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(models.len());
    for (&(env, k, slot), m) in models {
        for (f, net) in m.networks.iter().enumerate() {
            save_checkpoint(net, &dir.join(file_name(env, k, slot, f)))?;
        }
        entries.push(IndexEntry {
            env,
            k,
            slot,
            folds: m.networks.len(),
            fold_of: m.fold_of.clone(),
        });
    }
    let index = Index {
        policy: policy.to_string(),
        entries,
    };
    let path = dir.join("index.json");
    let text = serde_json::to_string_pretty(&index).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub(crate) fn load_models(dir: &Path, policy: &str) -> Result<BTreeMap<Key, FoldModels>> {
    let path = dir.join("index.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let index: Index = serde_json::from_str(&text).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })?;
    if index.policy != policy {
        return Err(Error::data(format!(
            "{}: checkpoints belong to policy `{}`, not `{policy}`",
            dir.display(),
            index.policy
        )));
    }
    let mut out = BTreeMap::new();
    for e in index.entries {
        if e.fold_of.iter().any(|&f| f >= e.folds) {
            return Err(Error::data(format!("{}: fold index out of range", path.display())));
        }
        let networks = (0..e.folds)
            .map(|f| load_checkpoint(&dir.join(file_name(e.env, e.k, e.slot, f))))
            .collect::<Result<Vec<_>>>()?;
        out.insert(
            (e.env, e.k, e.slot),
            FoldModels {
                networks,
                fold_of: e.fold_of,
            },
        );
    }
    Ok(out)
}

/// Supervised learning on the raw first-K scores, with out-of-fold
/// prediction from k-fold training per (environment, K).
#[derive(Clone, Debug)]
pub struct SlPolicy {
    models: BTreeMap<Key, FoldModels>,
}

impl SlPolicy {
    /// Trains one k-fold ensemble per (environment, K). `template` supplies
    /// every hyperparameter except input/output sizes and the seed, which is
    /// derived from `template.seed`, the environment id and K.
    pub fn fit(
        matrix: &FeedbackMatrix,
        split: &WorkerSplit,
        envs: &[Environment],
        ks: &[usize],
        template: &MlpConfig,
        folds: usize,
    ) -> Result<Self> {
        let targets = crate::feedback::output_cdfs(matrix, split)?;
        let jobs: Vec<(&Environment, usize)> = envs.iter().flat_map(|e| ks.iter().map(move |&k| (e, k))).collect();
        let fitted = jobs
            .par_iter()
            .map(|&(env, k)| {
                let view = EnvironmentView::new(matrix, split, env)?;
                let data = sl_dataset(&view, k, &targets)?;
                let mut config = template.clone();
                config.input_dim = k;
                config.output_dim = matrix.scale().len();
                config.seed = derive_seed(template.seed, "sl", &[env.id as u64, k as u64]);
                let cv = kfold_fit(&data, folds, &config)?;
                Ok((
                    (env.id, k, 0),
                    FoldModels {
                        networks: cv.networks,
                        fold_of: cv.fold_of,
                    },
                ))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(Self { models: fitted })
    }

    pub fn is_trained_for(&self, env: usize, k: usize) -> bool {
        self.models.contains_key(&(env, k, 0))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        save_models(dir, "sl", &self.models)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let models = load_models(dir, "sl")?;
        for (&(_, k, _), m) in &models {
            if m.networks.iter().any(|n| n.config().input_dim != k) {
                return Err(Error::data(format!("{}: network input size differs from K = {k}", dir.display())));
            }
        }
        Ok(Self { models })
    }
}

impl Policy for SlPolicy {
    fn name(&self) -> &str {
        "sl"
    }

    fn predict(&self, view: &EnvironmentView<'_>, k: usize, unit: usize) -> Result<Cdf> {
        view.check_k(k)?;
        let models = self
            .models
            .get(&(view.env.id, k, 0))
            .ok_or_else(|| Error::NotTrained(format!("SL has no networks for environment {} and K = {k}", view.env.id)))?;
        models.network_for(unit)?.predict_one(&view.normalized_scores(unit, k))
    }
}
