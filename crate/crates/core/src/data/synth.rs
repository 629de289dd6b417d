use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::feedback::{Cdf, FeedbackMatrix, OrdinalScale};
use crate::seed::rng_for;

/// Exchangeable synthetic population on the normalized scale.
///
/// Unit t has a location `mu_t ~ N(0, unit_location_spread^2)` and a
/// polarization weight `pi_t ~ U(0, min(unit_polarization_spread, 1))`.
/// Worker k has a persistent bias `b_k ~ N(0, worker_bias_spread^2)` and a
/// noise level `sigma_k ~ U(worker_noise_floor, worker_noise_floor +
/// worker_noise_spread)`. A response centers on `mu_t` with probability
/// `1 - pi_t`, otherwise on -1 or +1 with equal odds, adds `b_k + sigma_k z`
/// and snaps to the nearest scale point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub num_units: usize,
    pub num_workers: usize,
    pub scale: OrdinalScale,
    pub unit_location_spread: f64,
    pub unit_polarization_spread: f64,
    pub worker_bias_spread: f64,
    pub worker_noise_spread: f64,
    pub worker_noise_floor: f64,
    /// The last `repeats` units reuse the latent parameters of the first
    /// `repeats` units and are listed as repeated pairs.
    pub repeats: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_units: 1000,
            num_workers: 39,
            scale: OrdinalScale::eleven_point(),
            unit_location_spread: 0.5,
            unit_polarization_spread: 0.2,
            worker_bias_spread: 0.05,
            worker_noise_spread: 0.3,
            worker_noise_floor: 0.3,
            repeats: 0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_units == 0 || self.num_workers == 0 {
            return Err(Error::invalid("synthetic data needs at least one unit and one worker"));
        }
        let spreads = [
            self.unit_location_spread,
            self.unit_polarization_spread,
            self.worker_bias_spread,
            self.worker_noise_spread,
            self.worker_noise_floor,
        ];
        if spreads.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::invalid("spreads must be finite and nonnegative"));
        }
        if 2 * self.repeats > self.num_units {
            return Err(Error::invalid("repeats may cover at most half of the units"));
        }
        Ok(())
    }
}

/// Upper decision boundary of each scale point; the last is +inf.
fn boundaries(scale: &OrdinalScale) -> Vec<f64> {
    let v = scale.normalized();
    (0..v.len())
        .map(|j| if j + 1 < v.len() { 0.5 * (v[j] + v[j + 1]) } else { f64::INFINITY })
        .collect()
}

fn snap(x: f64, bounds: &[f64]) -> usize {
    bounds.iter().position(|&m| x <= m).expect("last bound is infinite")
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `P(c + b + sigma z <= m)` with `b ~ N(0, bias^2)`, `z ~ N(0, 1)` and
/// sigma fixed.
fn below(m: f64, c: f64, bias: f64, sigma: f64) -> f64 {
    if m.is_infinite() {
        return 1.0;
    }
    let sd = (bias * bias + sigma * sigma).sqrt();
    if sd == 0.0 {
        return if c <= m { 1.0 } else { 0.0 };
    }
    normal_cdf((m - c) / sd)
}

/// Averages `f(sigma)` over `sigma ~ U(floor, floor + spread)` with
/// composite Simpson's rule.
fn average_over_sigma(floor: f64, spread: f64, f: impl Fn(f64) -> f64) -> f64 {
    if spread == 0.0 {
        return f(floor);
    }
    const INTERVALS: usize = 256;
    let h = spread / INTERVALS as f64;
    let mut acc = f(floor) + f(floor + spread);
    for i in 1..INTERVALS {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(floor + h * i as f64);
    }
    acc * h / 3.0 / spread
}

/// Population CDF of a unit with latent `(mu, pi)`: the score law of a
/// fresh worker, integrating out bias, noise level and noise.
pub fn population_cdf(config: &SynthConfig, mu: f64, pi: f64) -> Result<Cdf> {
    let bounds = boundaries(&config.scale);
    let components = [(1.0 - pi, mu), (0.5 * pi, -1.0), (0.5 * pi, 1.0)];
    let values = bounds
        .iter()
        .map(|&m| {
            components
                .iter()
                .filter(|(w, _)| *w > 0.0)
                .map(|&(w, c)| {
                    w * average_over_sigma(config.worker_noise_floor, config.worker_noise_spread, |s| {
                        below(m, c, config.worker_bias_spread, s)
                    })
                })
                .sum::<f64>()
                .clamp(0.0, 1.0)
        })
        .collect();
    Cdf::new(values)
}

/// Draws a score matrix and returns it with each unit's population CDF.
pub fn synth_generate(config: &SynthConfig) -> Result<(FeedbackMatrix, Vec<Cdf>)> {
    config.validate()?;
    let scale = &config.scale;
    let bounds = boundaries(scale);
    let base_units = config.num_units - config.repeats;

    let mut unit_rng = rng_for(config.seed, "synth-units", &[]);
    let polar_max = config.unit_polarization_spread.min(1.0);
    let latent: Vec<(f64, f64)> = (0..base_units)
        .map(|_| {
            let z: f64 = unit_rng.sample(StandardNormal);
            let pi = polar_max * unit_rng.random::<f64>();
            (config.unit_location_spread * z, pi)
        })
        .collect();
    let latent: Vec<(f64, f64)> = latent.iter().chain(&latent[..config.repeats]).copied().collect();

    let mut worker_rng = rng_for(config.seed, "synth-workers", &[]);
    let workers: Vec<(f64, f64)> = (0..config.num_workers)
        .map(|_| {
            let z: f64 = worker_rng.sample(StandardNormal);
            let sigma = config.worker_noise_floor + config.worker_noise_spread * worker_rng.random::<f64>();
            (config.worker_bias_spread * z, sigma)
        })
        .collect();

    let mut scores = Vec::with_capacity(config.num_units * config.num_workers);
    for (t, &(mu, pi)) in latent.iter().enumerate() {
        let mut rng = rng_for(config.seed, "synth-responses", &[t as u64]);
        for &(bias, sigma) in &workers {
            let center = if rng.random::<f64>() < pi {
                if rng.random_bool(0.5) { 1.0 } else { -1.0 }
            } else {
                mu
            };
            let z: f64 = rng.sample(StandardNormal);
            scores.push(scale.raw_labels()[snap(center + bias + sigma * z, &bounds)]);
        }
    }
    let truth = latent
        .iter()
        .map(|&(mu, pi)| population_cdf(config, mu, pi))
        .collect::<Result<Vec<_>>>()?;
    let width = config.num_units.to_string().len();
    let unit_ids = (0..config.num_units).map(|t| format!("u{t:0width$}")).collect();
    let worker_ids = (0..config.num_workers).map(|k| k.to_string()).collect();
    let pairs = (0..config.repeats).map(|r| (r, base_units + r)).collect();
    let matrix = FeedbackMatrix::new(scores, scale.clone(), unit_ids, worker_ids, pairs)?;
    Ok((matrix, truth))
}

/// Long-format `unit_id,score,cdf` file of population CDFs.
pub fn write_truth(matrix: &FeedbackMatrix, truth: &[Cdf], path: &Path) -> Result<()> {
    let ctx = || path.display().to_string();
    let mut w = csv::Writer::from_path(path).map_err(|source| Error::Csv { context: ctx(), source })?;
    w.write_record(["unit_id", "score", "cdf"])
        .map_err(|source| Error::Csv { context: ctx(), source })?;
    for (id, cdf) in matrix.unit_ids().iter().zip(truth) {
        for (label, v) in matrix.scale().raw_labels().iter().zip(cdf.values()) {
            w.write_record([id.as_str(), &label.to_string(), &v.to_string()])
                .map_err(|source| Error::Csv { context: ctx(), source })?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
