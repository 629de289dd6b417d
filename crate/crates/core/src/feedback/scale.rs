use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An ordered score set with its raw integer labels and their positions in
/// `[-1, 1]`.
///
/// Normalized values are `raw / max|raw|`, so `-5..=5` maps to steps of 0.2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<i32>", into = "Vec<i32>")]
pub struct OrdinalScale {
    raw_labels: Vec<i32>,
    normalized: Vec<f64>,
}

impl OrdinalScale {
    pub fn new(raw_labels: Vec<i32>) -> Result<Self> {
        if raw_labels.len() < 2 {
            return Err(Error::invalid(format!(
                "a scale needs at least two labels, got {}",
                raw_labels.len()
            )));
        }
        if raw_labels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!(
                "scale labels must be strictly increasing: {raw_labels:?}"
            )));
        }
        let max_abs = raw_labels.iter().map(|l| l.unsigned_abs()).max().unwrap_or(0);
        if max_abs == 0 {
            return Err(Error::invalid("scale labels cannot all be zero"));
        }
        let normalized = raw_labels
            .iter()
            .map(|&l| f64::from(l) / f64::from(max_abs))
            .collect();
        Ok(Self {
            raw_labels,
            normalized,
        })
    }

    /// The symmetric scale `-half..=half`, e.g. `symmetric(5)` is the
    /// 11-point scale.
    pub fn symmetric(half: i32) -> Self {
        assert!(half >= 1);
        Self::new((-half..=half).collect()).expect("symmetric scale is valid")
    }

    pub fn eleven_point() -> Self {
        Self::symmetric(5)
    }

    pub fn five_point() -> Self {
        Self::symmetric(2)
    }

    pub fn binary() -> Self {
        Self::new(vec![-1, 1]).expect("binary scale is valid")
    }

    pub fn len(&self) -> usize {
        self.raw_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn raw_labels(&self) -> &[i32] {
        &self.raw_labels
    }

    pub fn normalized(&self) -> &[f64] {
        &self.normalized
    }

    pub fn index_of(&self, raw: i32) -> Option<usize> {
        self.raw_labels.binary_search(&raw).ok()
    }

    pub fn normalize(&self, raw: i32) -> Option<f64> {
        self.index_of(raw).map(|i| self.normalized[i])
    }

    pub fn contains(&self, raw: i32) -> bool {
        self.index_of(raw).is_some()
    }

    pub fn zero_index(&self) -> Option<usize> {
        self.index_of(0)
    }

    pub fn is_symmetric(&self) -> bool {
        self.raw_labels
            .iter()
            .zip(self.raw_labels.iter().rev())
            .all(|(a, b)| *a == -*b)
    }
}

impl TryFrom<Vec<i32>> for OrdinalScale {
    type Error = Error;

    fn try_from(raw: Vec<i32>) -> Result<Self> {
        Self::new(raw)
    }
}

impl From<OrdinalScale> for Vec<i32> {
    fn from(s: OrdinalScale) -> Self {
        s.raw_labels
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eleven_point_normalizes_in_fifths() {
        let s = OrdinalScale::eleven_point();
        assert_eq!(s.len(), 11);
        assert_eq!(s.normalized()[0], -1.0);
        assert_eq!(s.normalized()[10], 1.0);
        assert!((s.normalized()[6] - 0.2).abs() < 1e-15);
        assert_eq!(s.zero_index(), Some(5));
    }

    #[test]
    fn rejects_bad_label_lists() {
        assert!(OrdinalScale::new(vec![1]).is_err());
        assert!(OrdinalScale::new(vec![1, 1]).is_err());
        assert!(OrdinalScale::new(vec![2, 1]).is_err());
        assert!(OrdinalScale::new(vec![0, 0]).is_err());
    }

    #[test]
    fn asymmetric_scale_still_in_unit_interval() {
        let s = OrdinalScale::new(vec![1, 2, 3, 4]).unwrap();
        assert!(s.normalized().iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(!s.is_symmetric());
        assert!(OrdinalScale::binary().is_symmetric());
    }
}
