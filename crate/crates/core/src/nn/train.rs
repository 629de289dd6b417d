use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{AdamW, Matrix, MlpConfig, Mode, Network};
use crate::error::{Error, Result};
use crate::feedback::CDF_TOLERANCE;
use crate::seed::rng_for;

/// Paired inputs and target CDF rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub inputs: Matrix,
    pub targets: Matrix,
}

impl Dataset {
    pub fn new(inputs: Matrix, targets: Matrix) -> Result<Self> {
        if inputs.rows() != targets.rows() {
            return Err(Error::invalid(format!(
                "{} input rows but {} target rows",
                inputs.rows(),
                targets.rows()
            )));
        }
        for i in 0..targets.rows() {
            let r = targets.row(i);
            let ok = r.windows(2).all(|w| w[1] >= w[0] - CDF_TOLERANCE)
                && r.iter().all(|v| (0.0..=1.0).contains(v))
                && r.last().is_some_and(|v| (v - 1.0).abs() <= CDF_TOLERANCE);
            if !ok {
                return Err(Error::invalid(format!("target row {i} is not a valid CDF: {r:?}")));
            }
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            inputs: self.inputs.select_rows(indices),
            targets: self.targets.select_rows(indices),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
    /// Mean minibatch loss of the last epoch run.
    pub final_train_loss: f64,
    pub train_loss_history: Vec<f64>,
    pub val_loss_history: Vec<f64>,
}

/// Trains a fresh network with seeded minibatch shuffling, evaluating the
/// validation loss in eval mode after each epoch and returning the
/// parameters from the best validation epoch.
pub fn train(config: &MlpConfig, train_set: &Dataset, val_set: &Dataset) -> Result<(Network, TrainReport)> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::invalid("training and validation sets must be nonempty"));
    }
    let mut net = Network::new(config.clone())?;
    let mut opt = AdamW::new(&net, config.learning_rate, config.weight_decay);
    let mut rng = rng_for(config.seed, "mlp-train", &[]);

    let n = train_set.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut best = (f64::INFINITY, net.clone(), 0usize);
    let mut since_best = 0;
    let mut train_hist = Vec::new();
    let mut val_hist = Vec::new();
    let mut stopped_early = false;

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            // a lone trailing row has no batch variance
            if chunk.len() < 2 && n >= 2 {
                continue;
            }
            let b = train_set.subset(chunk);
            let lg = net.loss_and_grad(&b.inputs, &b.targets, Mode::Train, Some(&mut rng))?;
            net.update_running_stats(&lg.batch_stats);
            opt.step(&mut net, &lg.grads);
            epoch_loss += lg.loss;
            batches += 1;
        }
        train_hist.push(epoch_loss / batches.max(1) as f64);
        let val = net.evaluate_loss(&val_set.inputs, &val_set.targets)?;
        val_hist.push(val);
        if val < best.0 {
            best = (val, net.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                stopped_early = true;
                break;
            }
        }
    }

    let report = TrainReport {
        epochs_run: train_hist.len(),
        best_epoch: best.2,
        best_val_loss: best.0,
        stopped_early,
        final_train_loss: *train_hist.last().unwrap_or(&f64::NAN),
        train_loss_history: train_hist,
        val_loss_history: val_hist,
    };
    Ok((best.1, report))
}
