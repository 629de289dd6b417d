use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::Granularity;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    /// Number of inputs, i.e. the K scores fed to the network.
    pub input_dim: usize,
    /// Number of scale points in the predicted CDF.
    pub output_dim: usize,
    pub hidden_layers: usize,
    pub hidden_size: usize,
    pub dropout_p: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    /// Share of the training rows held back for early stopping.
    pub val_fraction: f64,
    pub seed: u64,
}

impl MlpConfig {
    /// Tuned defaults for each feedback granularity.
    pub fn for_granularity(granularity: Granularity, input_dim: usize, output_dim: usize) -> Self {
        let (hidden_size, batch_size, learning_rate, weight_decay) = match granularity {
            Granularity::Two => (25, 25, 0.01, 0.001),
            Granularity::Five => (25, 50, 0.01, 0.001),
            Granularity::Eleven => (50, 50, 0.005, 0.0005),
        };
        Self {
            input_dim,
            output_dim,
            hidden_layers: 2,
            hidden_size,
            dropout_p: 0.2,
            learning_rate,
            weight_decay,
            batch_size,
            patience: 8,
            max_epochs: 500,
            val_fraction: 0.1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::invalid(format!("MLP config: {what}")));
        if self.input_dim == 0 || self.output_dim < 2 {
            return bad("input_dim must be >= 1 and output_dim >= 2");
        }
        if self.hidden_layers == 0 || self.hidden_size == 0 {
            return bad("hidden_layers and hidden_size must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad("dropout_p must lie in [0, 1)");
        }
        if !(self.learning_rate > 0.0) || self.weight_decay < 0.0 {
            return bad("learning_rate must be positive and weight_decay nonnegative");
        }
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 {
            return bad("batch_size, patience and max_epochs must be positive");
        }
        if !(self.val_fraction > 0.0 && self.val_fraction <= 0.5) {
            return bad("val_fraction must lie in (0, 0.5]");
        }
        Ok(())
    }
}
