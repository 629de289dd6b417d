use super::{Matrix, Mode, Network};
use crate::error::Result;
use crate::seed::rng_for;

/// Worst disagreement between analytic gradients and central differences.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    pub entries: usize,
}

/// Compares `loss_and_grad` against central finite differences with the
/// given step, entry by entry. The relative error uses
/// `max(|analytic|, |numeric|, 1e-6)` as denominator so exactly-zero
/// gradients do not divide by zero. Dropout masks are replayed from
/// `dropout_seed` for every evaluation.
pub fn check_gradients(net: &Network, batch: &Matrix, targets: &Matrix, mode: Mode, step: f64, dropout_seed: u64) -> Result<GradientCheck> {
    let loss_at = |n: &Network| -> Result<f64> {
        let mut rng = rng_for(dropout_seed, "gradient-check", &[]);
        Ok(n.loss_and_grad(batch, targets, mode, Some(&mut rng))?.loss)
    };
    let analytic = {
        let mut rng = rng_for(dropout_seed, "gradient-check", &[]);
        net.loss_and_grad(batch, targets, mode, Some(&mut rng))?.grads.flatten()
    };
    let mut probe = net.clone();
    let sizes: Vec<usize> = net.params().iter().map(|p| p.len()).collect();
    let mut worst: f64 = 0.0;
    let mut index = 0;
    for (t, len) in sizes.into_iter().enumerate() {
        for i in 0..len {
            let orig = probe.params()[t][i];
            probe.params_mut()[t][i] = orig + step;
            let up = loss_at(&probe)?;
            probe.params_mut()[t][i] = orig - step;
            let down = loss_at(&probe)?;
            probe.params_mut()[t][i] = orig;
            let numeric = (up - down) / (2.0 * step);
            let a = analytic[index];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
            index += 1;
        }
    }
    Ok(GradientCheck {
        max_relative_error: worst,
        entries: index,
    })
}
