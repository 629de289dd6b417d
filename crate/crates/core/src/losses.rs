//! Evaluation losses over ordinal predictions and the preference signals
//! that reward-model training targets.
//!
//! Probabilities are clamped below by [`EPS`] right before every logarithm
//! and terms of the form `0 * log 0` are taken to be 0, so an exact
//! prediction of a point mass scores exactly zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::{Cdf, OrdinalScale, Pmf};

pub const EPS: f64 = 1e-12;

fn safe_ln(x: f64) -> f64 {
    x.max(EPS).ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossKind {
    #[serde(rename = "cumlog")]
    CumulativeLog,
    #[serde(rename = "stdlog")]
    StandardLog,
    #[serde(rename = "pref1")]
    PrefIgnoreNeutral,
    #[serde(rename = "pref2")]
    PrefKeepNeutral,
}

impl LossKind {
    pub fn flag(self) -> &'static str {
        match self {
            LossKind::CumulativeLog => "cumlog",
            LossKind::StandardLog => "stdlog",
            LossKind::PrefIgnoreNeutral => "pref1",
            LossKind::PrefKeepNeutral => "pref2",
        }
    }

    /// Loss of predicting `pred` when the target distribution is `target`.
    pub fn evaluate(self, scale: &OrdinalScale, target: &Cdf, pred: &Cdf) -> Result<f64> {
        match self {
            LossKind::CumulativeLog => cumulative_log_loss(target, pred),
            LossKind::StandardLog => standard_log_loss(&target.to_pmf(), &pred.to_pmf()),
            LossKind::PrefIgnoreNeutral => {
                pref_loss_ignore_neutral(scale, &target.to_pmf(), &pred.to_pmf())
            }
            LossKind::PrefKeepNeutral => pref_loss_keep_neutral(scale, &target.to_pmf(), &pred.to_pmf()),
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cumlog" => Ok(LossKind::CumulativeLog),
            "stdlog" => Ok(LossKind::StandardLog),
            "pref1" => Ok(LossKind::PrefIgnoreNeutral),
            "pref2" => Ok(LossKind::PrefKeepNeutral),
            other => Err(Error::invalid(format!(
                "unknown loss `{other}`, expected cumlog | stdlog | pref1 | pref2"
            ))),
        }
    }
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::invalid(format!("scale mismatch: {a} vs {b} points")));
    }
    Ok(())
}

/// Mean binary log loss over the thresholds of the CDF:
/// `-(1/(|Y|-1)) * sum_y [P(y) ln Q(y) + (1 - P(y)) ln(1 - Q(y))]`.
pub fn cumulative_log_loss(target: &Cdf, pred: &Cdf) -> Result<f64> {
    check_len(target.len(), pred.len())?;
    let m = target.len();
    if m < 2 {
        return Err(Error::invalid("cumulative log loss needs at least two scale points"));
    }
    let mut total = 0.0;
    for (&p, &q) in target.values().iter().zip(pred.values()) {
        if p > 0.0 {
            total += p * safe_ln(q);
        }
        if p < 1.0 {
            total += (1.0 - p) * safe_ln(1.0 - q);
        }
    }
    Ok(-total / (m - 1) as f64)
}

/// `-sum_y p(y) ln q(y)`.
pub fn standard_log_loss(target: &Pmf, pred: &Pmf) -> Result<f64> {
    check_len(target.len(), pred.len())?;
    Ok(-target
        .values()
        .iter()
        .zip(pred.values())
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, q)| p * safe_ln(*q))
        .sum::<f64>())
}

/// Binary log loss `-(a ln b + (1 - a) ln(1 - b))`.
pub fn binary_log_loss(a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
        return Err(Error::invalid(format!("binary log loss arguments must lie in [0, 1]: ({a}, {b})")));
    }
    let mut total = 0.0;
    if a > 0.0 {
        total += a * safe_ln(b);
    }
    if a < 1.0 {
        total += (1.0 - a) * safe_ln(1.0 - b);
    }
    Ok(-total)
}

/// Mass split of a PMF into (negative, neutral, positive) parts. A scale
/// without a zero point has neutral mass 0.
fn split_mass(scale: &OrdinalScale, pmf: &Pmf) -> (f64, f64, f64) {
    let mut neg = 0.0;
    let mut neutral = 0.0;
    let mut pos = 0.0;
    for (&y, &p) in scale.normalized().iter().zip(pmf.values()) {
        if y > 0.0 {
            pos += p;
        } else if y < 0.0 {
            neg += p;
        } else {
            neutral += p;
        }
    }
    (neg, neutral, pos)
}

/// Preference loss that drops neutral mass. When the target has no
/// non-neutral mass the loss is `-p(0) ln q(0)`.
pub fn pref_loss_ignore_neutral(scale: &OrdinalScale, target: &Pmf, pred: &Pmf) -> Result<f64> {
    check_len(scale.len(), target.len())?;
    check_len(target.len(), pred.len())?;
    let (p_neg, p_zero, p_pos) = split_mass(scale, target);
    let (q_neg, q_zero, q_pos) = split_mass(scale, pred);
    let p_decided = p_neg + p_pos;
    if p_decided > 0.0 {
        let a = (p_pos / p_decided).clamp(0.0, 1.0);
        let b = (q_pos / (q_neg + q_pos).max(EPS)).clamp(0.0, 1.0);
        binary_log_loss(a, b)
    } else {
        Ok(-p_zero * safe_ln(q_zero))
    }
}

/// Preference loss that counts neutral mass as half a vote each way.
pub fn pref_loss_keep_neutral(scale: &OrdinalScale, target: &Pmf, pred: &Pmf) -> Result<f64> {
    check_len(scale.len(), target.len())?;
    check_len(target.len(), pred.len())?;
    let (_, p_zero, p_pos) = split_mass(scale, target);
    let (_, q_zero, q_pos) = split_mass(scale, pred);
    binary_log_loss(
        (p_pos + 0.5 * p_zero).clamp(0.0, 1.0),
        (q_pos + 0.5 * q_zero).clamp(0.0, 1.0),
    )
}

/// Fraction-preferring target a reward model is trained toward.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreferenceSignal {
    value: Option<f64>,
}

impl PreferenceSignal {
    pub fn defined(value: f64) -> Self {
        Self { value: Some(value) }
    }

    pub fn undefined() -> Self {
        Self { value: None }
    }

    pub fn value(&self) -> Option<f64> {
        self.value
    }

    pub fn is_defined(&self) -> bool {
        self.value.is_some()
    }
}

/// `B+ / (B+ + B-)` with `B+ = #{s > y}` and `B- = #{s < -y}` on normalized
/// scores; undefined when no score clears the threshold either way.
pub fn preference_signal_thresholded(scores: &[f64], y_threshold: f64) -> PreferenceSignal {
    let up = scores.iter().filter(|&&s| s > y_threshold).count();
    let down = scores.iter().filter(|&&s| s < -y_threshold).count();
    if up + down == 0 {
        PreferenceSignal::undefined()
    } else {
        PreferenceSignal::defined(up as f64 / (up + down) as f64)
    }
}

/// `(#{s > 0} + 0.5 #{s = 0}) / |scores|`.
pub fn preference_signal_half_neutral(scores: &[f64]) -> Result<PreferenceSignal> {
    if scores.is_empty() {
        return Err(Error::invalid("preference signal of an empty multiset"));
    }
    let up = scores.iter().filter(|&&s| s > 0.0).count() as f64;
    let tie = scores.iter().filter(|&&s| s == 0.0).count() as f64;
    Ok(PreferenceSignal::defined((up + 0.5 * tie) / scores.len() as f64))
}

/// The half-neutral signal read off a CDF over `scale`: positive mass plus
/// half the neutral mass.
pub fn half_neutral_signal_from_cdf(scale: &OrdinalScale, cdf: &Cdf) -> Result<f64> {
    check_len(scale.len(), cdf.len())?;
    let (_, zero, pos) = split_mass(scale, &cdf.to_pmf());
    Ok(pos + 0.5 * zero)
}
