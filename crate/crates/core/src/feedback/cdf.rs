use serde::{Deserialize, Serialize};

use super::OrdinalScale;
use crate::error::{Error, Result};

/// Tolerance used when validating that probability vectors are well formed.
pub const CDF_TOLERANCE: f64 = 1e-9;

/// A cumulative distribution over the points of an ordinal scale.
///
/// Entries are nondecreasing, lie in `[0, 1]`, and the last entry is exactly 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cdf(Vec<f64>);

/// A probability mass function over the points of an ordinal scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pmf(Vec<f64>);

impl Cdf {
    /// Validates `values` and snaps tiny round-off (within [`CDF_TOLERANCE`])
    /// back into the feasible set: the last entry is set to exactly 1 and
    /// entries are clamped to `[0, 1]`.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("empty CDF"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite CDF entry in {values:?}")));
        }
        let last = *values.last().unwrap();
        if (last - 1.0).abs() > CDF_TOLERANCE {
            return Err(Error::invalid(format!("CDF must end at 1, got {last}")));
        }
        for w in values.windows(2) {
            if w[1] < w[0] - CDF_TOLERANCE {
                return Err(Error::invalid(format!("CDF is decreasing: {values:?}")));
            }
        }
        if values
            .iter()
            .any(|&v| !(-CDF_TOLERANCE..=1.0 + CDF_TOLERANCE).contains(&v))
        {
            return Err(Error::invalid(format!("CDF entry outside [0, 1]: {values:?}")));
        }
        let n = values.len();
        values[n - 1] = 1.0;
        let mut running = 0.0_f64;
        for v in &mut values {
            *v = v.clamp(running, 1.0);
            running = *v;
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_pmf(&self) -> Pmf {
        let mut prev = 0.0;
        let p = self
            .0
            .iter()
            .map(|&c| {
                let m = (c - prev).max(0.0);
                prev = c;
                m
            })
            .collect();
        Pmf(p)
    }

    /// True when every entry is exactly 0 or 1, i.e. the CDF of a point mass.
    pub fn is_degenerate(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Pmf {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("empty PMF"));
        }
        if values.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::invalid(format!("PMF entries must be finite and >= 0: {values:?}")));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > CDF_TOLERANCE {
            return Err(Error::invalid(format!("PMF must sum to 1, got {total}")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_cdf(&self) -> Cdf {
        let mut acc = 0.0;
        let mut c: Vec<f64> = self
            .0
            .iter()
            .map(|&p| {
                acc += p;
                acc.min(1.0)
            })
            .collect();
        let n = c.len();
        c[n - 1] = 1.0;
        Cdf(c)
    }
}

/// Empirical CDF of raw-label `scores` on `scale`:
/// `F(y) = #{s <= y} / |scores|` at every scale point.
pub fn empirical_cdf(scores: &[i32], scale: &OrdinalScale) -> Result<Cdf> {
    if scores.is_empty() {
        return Err(Error::invalid("empirical CDF of an empty multiset"));
    }
    let mut counts = vec![0usize; scale.len()];
    for &s in scores {
        let idx = scale
            .index_of(s)
            .ok_or_else(|| Error::invalid(format!("score {s} is not a label of the scale")))?;
        counts[idx] += 1;
    }
    let n = scores.len();
    let mut acc = 0usize;
    let values = counts
        .iter()
        .map(|&c| {
            acc += c;
            acc as f64 / n as f64
        })
        .collect();
    Ok(Cdf(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn all_mass_at_minimum() {
        let c = empirical_cdf(&[-1, -1], &OrdinalScale::binary()).unwrap();
        assert_eq!(c.values(), &[1.0, 1.0]);
    }

    #[test]
    fn split_mass() {
        let c = empirical_cdf(&[-1, 1], &OrdinalScale::binary()).unwrap();
        assert_eq!(c.values(), &[0.5, 1.0]);
    }

    #[test]
    fn nineteen_scores_use_nineteen_as_denominator() {
        let scores: Vec<i32> = (0..19).map(|i| if i < 4 { -5 } else { 5 }).collect();
        let c = empirical_cdf(&scores, &OrdinalScale::eleven_point()).unwrap();
        assert_eq!(c.values()[0], 4.0 / 19.0);
    }

    #[test]
    fn unknown_label_is_named() {
        let err = empirical_cdf(&[-1, 3], &OrdinalScale::binary()).unwrap_err();
        assert!(err.to_string().contains('3'));
        assert!(empirical_cdf(&[], &OrdinalScale::binary()).is_err());
    }

    #[test]
    fn pmf_cdf_conversion() {
        let p = Pmf::new(vec![0.2, 0.3, 0.5]).unwrap();
        let c = p.to_cdf();
        assert!((c.values()[0] - 0.2).abs() < 1e-15);
        assert!((c.values()[1] - 0.5).abs() < 1e-15);
        assert_eq!(c.values()[2], 1.0);
        let back = c.to_pmf();
        for (a, b) in back.values().iter().zip(p.values()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn cdf_validation() {
        assert!(Cdf::new(vec![0.5, 0.4, 1.0]).is_err());
        assert!(Cdf::new(vec![0.5, 0.9]).is_err());
        assert!(Cdf::new(vec![-0.1, 1.0]).is_err());
        assert!(Cdf::new(vec![f64::NAN, 1.0]).is_err());
        let snapped = Cdf::new(vec![0.3, 1.0 - 1e-12]).unwrap();
        assert_eq!(snapped.values()[1], 1.0);
    }

    proptest! {
        #[test]
        fn empirical_cdf_is_valid(scores in prop::collection::vec(-5i32..=5, 1..60)) {
            let c = empirical_cdf(&scores, &OrdinalScale::eleven_point()).unwrap();
            prop_assert_eq!(*c.values().last().unwrap(), 1.0);
            for w in c.values().windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
        }
    }
}
