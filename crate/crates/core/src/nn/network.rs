use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Matrix, MlpConfig};
use crate::error::{Error, Result};
use crate::feedback::Cdf;
use crate::losses::EPS;
use crate::seed::{rng_for, SeededRng};

const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics for normalization, dropout active.
    Train,
    /// Running statistics for normalization, no dropout.
    Eval,
}

/// Affine map `x W + b` with `W` stored as `in x out`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    fn init(fan_in: usize, fan_out: usize, rng: &mut SeededRng) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let weight = (0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)).collect();
        let bias = (0..fan_out).map(|_| rng.random_range(-bound..bound)).collect();
        Self {
            weight: Matrix::from_vec(fan_in, fan_out, weight).expect("shape"),
            bias,
        }
    }

    fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = x.matmul(&self.weight);
        for i in 0..out.rows() {
            for (o, b) in out.row_mut(i).iter_mut().zip(&self.bias) {
                *o += b;
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

impl BatchNorm {
    fn new(width: usize) -> Self {
        Self {
            gamma: vec![1.0; width],
            beta: vec![0.0; width],
            running_mean: vec![0.0; width],
            running_var: vec![1.0; width],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiddenLayer {
    pub dense: Dense,
    pub norm: BatchNorm,
}

/// The CDF-headed multilayer perceptron.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    config: MlpConfig,
    hidden: Vec<HiddenLayer>,
    head: Dense,
}

/// Gradient tensors in the same order as [`Network::params`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            tensors: net.params().iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors.concat()
    }
}

/// Output of [`Network::loss_and_grad`].
#[derive(Clone, Debug)]
pub struct LossAndGrad {
    pub loss: f64,
    pub grads: Gradients,
    /// Per hidden layer (batch mean, biased batch variance, batch size), used
    /// to update running statistics. Empty in eval mode.
    pub batch_stats: Vec<(Vec<f64>, Vec<f64>, usize)>,
}

struct LayerCache {
    input: Matrix,
    x_hat: Matrix,
    inv_std: Vec<f64>,
    /// Output of the normalization (before ReLU).
    normed: Matrix,
    /// Per-entry dropout multiplier (0 or 1/(1-p)); `None` when inactive.
    drop_scale: Option<Vec<f64>>,
    mean: Vec<f64>,
    var: Vec<f64>,
}

struct Cache {
    layers: Vec<LayerCache>,
    head_input: Matrix,
    pmf: Matrix,
}

impl Network {
    pub fn new(config: MlpConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_for(config.seed, "mlp-init", &[]);
        let mut hidden = Vec::with_capacity(config.hidden_layers);
        let mut fan_in = config.input_dim;
        for _ in 0..config.hidden_layers {
            hidden.push(HiddenLayer {
                dense: Dense::init(fan_in, config.hidden_size, &mut rng),
                norm: BatchNorm::new(config.hidden_size),
            });
            fan_in = config.hidden_size;
        }
        let head = Dense::init(fan_in, config.output_dim, &mut rng);
        Ok(Self {
            config,
            hidden,
            head,
        })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn hidden_layers(&self) -> &[HiddenLayer] {
        &self.hidden
    }

    pub fn head(&self) -> &Dense {
        &self.head
    }

    pub fn head_mut(&mut self) -> &mut Dense {
        &mut self.head
    }

    /// Checks layer shapes chain from `input_dim` to `output_dim` and that
    /// running variances are positive. Used after deserialization.
    pub fn check_shapes(&self) -> Result<()> {
        let mut fan_in = self.config.input_dim;
        for (i, layer) in self.hidden.iter().enumerate() {
            let w = &layer.dense.weight;
            let width = w.cols();
            let n = &layer.norm;
            if w.rows() != fan_in
                || layer.dense.bias.len() != width
                || n.gamma.len() != width
                || n.beta.len() != width
                || n.running_mean.len() != width
                || n.running_var.len() != width
            {
                return Err(Error::invalid(format!("hidden layer {i} has inconsistent shapes")));
            }
            if n.running_var.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::invalid(format!("hidden layer {i} has a nonpositive running variance")));
            }
            fan_in = width;
        }
        if self.head.weight.rows() != fan_in
            || self.head.weight.cols() != self.config.output_dim
            || self.head.bias.len() != self.config.output_dim
        {
            return Err(Error::invalid("head layer has inconsistent shapes"));
        }
        Ok(())
    }

    /// Parameter tensors in a fixed order: for each hidden layer its weight,
    /// bias, normalization scale and shift, then the head weight and bias.
    pub fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(4 * self.hidden.len() + 2);
        for l in &self.hidden {
            out.push(l.dense.weight.data());
            out.push(&l.dense.bias);
            out.push(&l.norm.gamma);
            out.push(&l.norm.beta);
        }
        out.push(self.head.weight.data());
        out.push(&self.head.bias);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(4 * self.hidden.len() + 2);
        for l in &mut self.hidden {
            out.push(l.dense.weight.data_mut());
            out.push(&mut l.dense.bias);
            out.push(&mut l.norm.gamma);
            out.push(&mut l.norm.beta);
        }
        out.push(self.head.weight.data_mut());
        out.push(&mut self.head.bias);
        out
    }

    fn check_input(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.config.input_dim {
            return Err(Error::invalid(format!(
                "batch has {} columns, network expects {}",
                batch.cols(),
                self.config.input_dim
            )));
        }
        if batch.rows() == 0 {
            return Err(Error::invalid("empty batch"));
        }
        Ok(())
    }

    fn run(&self, batch: &Matrix, mode: Mode, mut rng: Option<&mut SeededRng>) -> Cache {
        let mut layers = Vec::with_capacity(self.hidden.len());
        let mut x = batch.clone();
        let n = batch.rows() as f64;
        for layer in &self.hidden {
            let a = layer.dense.apply(&x);
            let width = a.cols();
            let (mean, var) = match mode {
                Mode::Train => {
                    let mean: Vec<f64> = a.column_sums().into_iter().map(|s| s / n).collect();
                    let mut var = vec![0.0; width];
                    for i in 0..a.rows() {
                        for ((v, x), m) in var.iter_mut().zip(a.row(i)).zip(&mean) {
                            *v += (x - m) * (x - m);
                        }
                    }
                    var.iter_mut().for_each(|v| *v /= n);
                    (mean, var)
                }
                Mode::Eval => (layer.norm.running_mean.clone(), layer.norm.running_var.clone()),
            };
            let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
            let mut x_hat = a.clone();
            let mut normed = a;
            for i in 0..x_hat.rows() {
                let xr = x_hat.row_mut(i);
                for (j, v) in xr.iter_mut().enumerate() {
                    *v = (*v - mean[j]) * inv_std[j];
                }
                let nr = normed.row_mut(i);
                for (j, v) in nr.iter_mut().enumerate() {
                    *v = layer.norm.gamma[j] * x_hat.get(i, j) + layer.norm.beta[j];
                }
            }
            let mut out = normed.clone();
            out.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
            let p = self.config.dropout_p;
            let drop_scale = match (mode, rng.as_deref_mut()) {
                (Mode::Train, Some(r)) if p > 0.0 => {
                    let keep = 1.0 / (1.0 - p);
                    let mask: Vec<f64> = (0..out.data().len())
                        .map(|_| if r.random::<f64>() < p { 0.0 } else { keep })
                        .collect();
                    for (v, m) in out.data_mut().iter_mut().zip(&mask) {
                        *v *= m;
                    }
                    Some(mask)
                }
                _ => None,
            };
            layers.push(LayerCache {
                input: x,
                x_hat,
                inv_std,
                normed,
                drop_scale,
                mean,
                var,
            });
            x = out;
        }
        let logits = self.head.apply(&x);
        let mut pmf = logits;
        for i in 0..pmf.rows() {
            let r = pmf.row_mut(i);
            let max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in r.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            r.iter_mut().for_each(|v| *v /= total);
        }
        Cache {
            layers,
            head_input: x,
            pmf,
        }
    }

    /// Forward pass returning one CDF per row. In train mode normalization
    /// uses batch statistics and dropout is applied when `dropout_rng` is
    /// given.
    pub fn forward(&self, batch: &Matrix, mode: Mode, dropout_rng: Option<&mut SeededRng>) -> Result<Matrix> {
        self.check_input(batch)?;
        let cache = self.run(batch, mode, dropout_rng);
        Ok(pmf_to_cdf(&cache.pmf))
    }

    /// Eval-mode prediction, one [`Cdf`] per input row.
    pub fn predict(&self, batch: &Matrix) -> Result<Vec<Cdf>> {
        let cdfs = self.forward(batch, Mode::Eval, None)?;
        (0..cdfs.rows()).map(|i| Cdf::new(cdfs.row(i).to_vec())).collect()
    }

    pub fn predict_one(&self, input: &[f64]) -> Result<Cdf> {
        let m = Matrix::from_vec(1, input.len(), input.to_vec())?;
        Ok(self.predict(&m)?.remove(0))
    }

    /// Mean cumulative log loss of eval-mode predictions against `targets`.
    pub fn evaluate_loss(&self, batch: &Matrix, targets: &Matrix) -> Result<f64> {
        self.check_input(batch)?;
        self.check_targets(batch, targets)?;
        let cache = self.run(batch, Mode::Eval, None);
        Ok(cumulative_loss_rows(&cache.pmf, targets, None))
    }

    fn check_targets(&self, batch: &Matrix, targets: &Matrix) -> Result<()> {
        if targets.rows() != batch.rows() || targets.cols() != self.config.output_dim {
            return Err(Error::invalid(format!(
                "targets are {} x {}, expected {} x {}",
                targets.rows(),
                targets.cols(),
                batch.rows(),
                self.config.output_dim
            )));
        }
        Ok(())
    }

    /// Mean cumulative log loss over the batch and its exact gradient with
    /// respect to every parameter.
    pub fn loss_and_grad(
        &self,
        batch: &Matrix,
        targets: &Matrix,
        mode: Mode,
        dropout_rng: Option<&mut SeededRng>,
    ) -> Result<LossAndGrad> {
        self.check_input(batch)?;
        self.check_targets(batch, targets)?;
        let cache = self.run(batch, mode, dropout_rng);
        let n = batch.rows();
        let m = self.config.output_dim;

        let mut d_pmf = Matrix::zeros(n, m);
        let loss = cumulative_loss_rows(&cache.pmf, targets, Some(&mut d_pmf));

        // softmax backward: dz_i = p_i (dp_i - sum_k p_k dp_k)
        let mut d_logits = d_pmf;
        for i in 0..n {
            let p = cache.pmf.row(i);
            let dot: f64 = p.iter().zip(d_logits.row(i)).map(|(a, b)| a * b).sum();
            for (d, &pi) in d_logits.row_mut(i).iter_mut().zip(p) {
                *d = pi * (*d - dot);
            }
        }

        let mut tensors: Vec<Vec<f64>> = vec![Vec::new(); 4 * self.hidden.len() + 2];
        let head_slot = 4 * self.hidden.len();
        tensors[head_slot] = cache.head_input.t_matmul(&d_logits).data().to_vec();
        tensors[head_slot + 1] = d_logits.column_sums();
        let mut d_x = d_logits.matmul_t(&self.head.weight);

        for (li, (layer, lc)) in self.hidden.iter().zip(&cache.layers).enumerate().rev() {
            // dropout then ReLU
            let mut d_norm = d_x;
            if let Some(mask) = &lc.drop_scale {
                for (d, s) in d_norm.data_mut().iter_mut().zip(mask) {
                    *d *= s;
                }
            }
            for (d, &z) in d_norm.data_mut().iter_mut().zip(lc.normed.data()) {
                if z <= 0.0 {
                    *d = 0.0;
                }
            }
            let width = d_norm.cols();
            let mut d_gamma = vec![0.0; width];
            let mut d_beta = vec![0.0; width];
            for i in 0..n {
                for j in 0..width {
                    let g = d_norm.get(i, j);
                    d_gamma[j] += g * lc.x_hat.get(i, j);
                    d_beta[j] += g;
                }
            }
            let mut d_a = Matrix::zeros(n, width);
            match mode {
                Mode::Train => {
                    // dx = inv_std / n * (n dxh - sum(dxh) - xh * sum(dxh * xh))
                    let nf = n as f64;
                    for j in 0..width {
                        let g = layer.norm.gamma[j];
                        let mut sum_d = 0.0;
                        let mut sum_dx = 0.0;
                        for i in 0..n {
                            let dxh = d_norm.get(i, j) * g;
                            sum_d += dxh;
                            sum_dx += dxh * lc.x_hat.get(i, j);
                        }
                        for i in 0..n {
                            let dxh = d_norm.get(i, j) * g;
                            d_a.row_mut(i)[j] =
                                lc.inv_std[j] / nf * (nf * dxh - sum_d - lc.x_hat.get(i, j) * sum_dx);
                        }
                    }
                }
                Mode::Eval => {
                    for i in 0..n {
                        for j in 0..width {
                            d_a.row_mut(i)[j] = d_norm.get(i, j) * layer.norm.gamma[j] * lc.inv_std[j];
                        }
                    }
                }
            }
            tensors[4 * li] = lc.input.t_matmul(&d_a).data().to_vec();
            tensors[4 * li + 1] = d_a.column_sums();
            tensors[4 * li + 2] = d_gamma;
            tensors[4 * li + 3] = d_beta;
            d_x = d_a.matmul_t(&layer.dense.weight);
        }

        let batch_stats = match mode {
            Mode::Train => cache
                .layers
                .into_iter()
                .map(|lc| (lc.mean, lc.var, n))
                .collect(),
            Mode::Eval => Vec::new(),
        };
        Ok(LossAndGrad {
            loss,
            grads: Gradients { tensors },
            batch_stats,
        })
    }

    /// Folds batch statistics into the running averages with momentum 0.1.
    /// The running variance uses the unbiased batch variance.
    pub fn update_running_stats(&mut self, stats: &[(Vec<f64>, Vec<f64>, usize)]) {
        for (layer, (mean, var, n)) in self.hidden.iter_mut().zip(stats) {
            let correction = if *n > 1 { *n as f64 / (*n as f64 - 1.0) } else { 1.0 };
            for j in 0..mean.len() {
                let rm = &mut layer.norm.running_mean[j];
                *rm = (1.0 - BN_MOMENTUM) * *rm + BN_MOMENTUM * mean[j];
                let rv = &mut layer.norm.running_var[j];
                *rv = (1.0 - BN_MOMENTUM) * *rv + BN_MOMENTUM * var[j] * correction;
            }
        }
    }
}

fn pmf_to_cdf(pmf: &Matrix) -> Matrix {
    let mut out = pmf.clone();
    for i in 0..out.rows() {
        let r = out.row_mut(i);
        let mut acc = 0.0;
        for v in r.iter_mut() {
            acc += *v;
            *v = acc.min(1.0);
        }
        let last = r.len() - 1;
        r[last] = 1.0;
    }
    out
}

/// Mean over rows of the cumulative log loss, computed from the PMF with
/// `Q(y_j)` as a prefix sum and `1 - Q(y_j)` as a suffix sum. When `grad`
/// is given it receives d(mean loss)/d(pmf).
fn cumulative_loss_rows(pmf: &Matrix, targets: &Matrix, mut grad: Option<&mut Matrix>) -> f64 {
    let n = pmf.rows();
    let m = pmf.cols();
    let scale = 1.0 / ((m - 1) as f64 * n as f64);
    let mut total = 0.0;
    let mut prefix = vec![0.0; m];
    let mut suffix = vec![0.0; m];
    let mut g_q = vec![0.0; m];
    let mut g_r = vec![0.0; m];
    for i in 0..n {
        let p = pmf.row(i);
        let t = targets.row(i);
        let mut acc = 0.0;
        for j in 0..m {
            acc += p[j];
            prefix[j] = acc;
        }
        acc = 0.0;
        for j in (0..m).rev() {
            suffix[j] = acc;
            acc += p[j];
        }
        let mut row_loss = 0.0;
        for j in 0..m - 1 {
            let (q, r, target) = (prefix[j], suffix[j], t[j]);
            g_q[j] = 0.0;
            g_r[j] = 0.0;
            if target > 0.0 {
                row_loss -= target * q.max(EPS).ln();
                if q > EPS {
                    g_q[j] = -target / q;
                }
            }
            if target < 1.0 {
                row_loss -= (1.0 - target) * r.max(EPS).ln();
                if r > EPS {
                    g_r[j] = -(1.0 - target) / r;
                }
            }
        }
        total += row_loss;
        if let Some(g) = grad.as_deref_mut() {
            // dL/dp_k = sum_{j >= k} g_q[j] + sum_{j < k} g_r[j], j < m - 1
            let mut tail_q: f64 = g_q[..m - 1].iter().sum();
            let mut head_r = 0.0;
            let gr = g.row_mut(i);
            for k in 0..m {
                gr[k] = (tail_q + head_r) * scale;
                if k < m - 1 {
                    tail_q -= g_q[k];
                    head_r += g_r[k];
                }
            }
        }
    }
    total * scale
}
