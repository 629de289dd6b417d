use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{train, Dataset, MlpConfig, Network, TrainReport};
use crate::error::{Error, Result};
use crate::feedback::Cdf;
use crate::losses::cumulative_log_loss;
use crate::seed::{derive_seed, rng_for};

/// Shuffles `0..n` with the seed and cuts it into `k` contiguous folds whose
/// sizes differ by at most one.
pub fn fold_partition(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::invalid(format!("k-fold needs k >= 2, got {k}")));
    }
    if n < k {
        return Err(Error::invalid(format!("{k} folds need at least {k} rows, got {n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_for(seed, "kfold-assign", &[]));
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(idx[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

/// Networks trained per fold plus the out-of-fold prediction for every row.
#[derive(Clone, Debug)]
pub struct CrossValidated {
    pub networks: Vec<Network>,
    pub fold_of: Vec<usize>,
    pub predictions: Vec<Cdf>,
    pub reports: Vec<TrainReport>,
}

impl CrossValidated {
    /// Network that held `row` out.
    pub fn network_for(&self, row: usize) -> Option<&Network> {
        self.fold_of.get(row).map(|&f| &self.networks[f])
    }
}

/// k-fold training: each fold trains on the other folds (minus a
/// `val_fraction` carve-out for early stopping) and predicts its own rows.
/// Folds run in parallel with seeds derived from `(config.seed, fold)`.
pub fn kfold_fit(data: &Dataset, k: usize, config: &MlpConfig) -> Result<CrossValidated> {
    let folds = fold_partition(data.len(), k, config.seed)?;
    let results: Vec<Result<(Network, TrainReport, Vec<Cdf>)>> = folds
        .par_iter()
        .enumerate()
        .map(|(f, held_out)| {
            let mut rest: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, v)| v.iter().copied())
                .collect();
            rest.shuffle(&mut rng_for(config.seed, "kfold-val", &[f as u64]));
            if rest.len() < 2 {
                return Err(Error::invalid("each fold needs at least two training rows"));
            }
            let n_val = ((rest.len() as f64 * config.val_fraction).round() as usize).clamp(1, rest.len() - 1);
            let (val_idx, train_idx) = rest.split_at(n_val);
            let mut fold_config = config.clone();
            fold_config.seed = derive_seed(config.seed, "kfold-train", &[f as u64]);
            let (net, report) = train(&fold_config, &data.subset(train_idx), &data.subset(val_idx))?;
            let preds = net.predict(&data.inputs.select_rows(held_out))?;
            Ok((net, report, preds))
        })
        .collect();

    let mut fold_of = vec![usize::MAX; data.len()];
    let mut predictions: Vec<Option<Cdf>> = vec![None; data.len()];
    let mut networks = Vec::with_capacity(k);
    let mut reports = Vec::with_capacity(k);
    for (f, r) in results.into_iter().enumerate() {
        let (net, report, preds) = r?;
        for (&row, p) in folds[f].iter().zip(preds) {
            fold_of[row] = f;
            predictions[row] = Some(p);
        }
        networks.push(net);
        reports.push(report);
    }
    Ok(CrossValidated {
        networks,
        fold_of,
        predictions: predictions.into_iter().map(|p| p.expect("every row is held out once")).collect(),
        reports,
    })
}

/// Per-row held-out cumulative log loss, grouped by fold.
pub fn kfold_cv(data: &Dataset, k: usize, config: &MlpConfig) -> Result<Vec<(usize, Vec<(usize, f64)>)>> {
    let fitted = kfold_fit(data, k, config)?;
    let mut out: Vec<(usize, Vec<(usize, f64)>)> = (0..k).map(|f| (f, Vec::new())).collect();
    for (row, pred) in fitted.predictions.iter().enumerate() {
        let target = Cdf::new(data.targets.row(row).to_vec())?;
        let loss = cumulative_log_loss(&target, pred)?;
        out[fitted.fold_of[row]].1.push((row, loss));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_partition_the_rows() {
        let folds = fold_partition(1000, 5, 3).unwrap();
        assert!(folds.iter().all(|f| f.len() == 200));
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());

        let folds = fold_partition(7, 3, 1).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 2, 2]);
    }

    #[test]
    fn bad_fold_counts() {
        assert!(fold_partition(4, 5, 0).is_err());
        assert!(fold_partition(4, 1, 0).is_err());
    }
}
