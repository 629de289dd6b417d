use super::OrdinalScale;
use crate::error::{Error, Result};

/// Task units x workers table of raw integer scores.
///
/// Every unit has a score from every worker; the mask is carried for a
/// future missing-response representation but must be all-present.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackMatrix {
    scores: Vec<i32>,
    num_units: usize,
    num_workers: usize,
    scale: OrdinalScale,
    unit_ids: Vec<String>,
    worker_ids: Vec<String>,
    repeated_pairs: Vec<(usize, usize)>,
    mask: Vec<bool>,
}

impl FeedbackMatrix {
    /// Builds a matrix from row-major `scores` (`unit_ids.len()` rows of
    /// `worker_ids.len()` entries).
    pub fn new(
        scores: Vec<i32>,
        scale: OrdinalScale,
        unit_ids: Vec<String>,
        worker_ids: Vec<String>,
        repeated_pairs: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let num_units = unit_ids.len();
        let num_workers = worker_ids.len();
        if num_units == 0 || num_workers == 0 {
            return Err(Error::invalid("feedback matrix needs at least one unit and one worker"));
        }
        if scores.len() != num_units * num_workers {
            return Err(Error::invalid(format!(
                "score table has {} entries, expected {num_units} x {num_workers}",
                scores.len()
            )));
        }
        if let Some((i, s)) = scores.iter().enumerate().find(|(_, s)| !scale.contains(**s)) {
            return Err(Error::invalid(format!(
                "score {s} for unit {} worker {} is not on the scale {:?}",
                unit_ids[i / num_workers],
                worker_ids[i % num_workers],
                scale.raw_labels()
            )));
        }
        for &(a, b) in &repeated_pairs {
            if a >= b || b >= num_units {
                return Err(Error::invalid(format!(
                    "repeated pair ({a}, {b}) must satisfy a < b < {num_units}"
                )));
            }
        }
        let mask = vec![true; scores.len()];
        Ok(Self {
            scores,
            num_units,
            num_workers,
            scale,
            unit_ids,
            worker_ids,
            repeated_pairs,
            mask,
        })
    }

    /// Same units, workers and pairs with a new score table on a new scale.
    pub fn with_scores(&self, scores: Vec<i32>, scale: OrdinalScale) -> Result<Self> {
        Self::new(
            scores,
            scale,
            self.unit_ids.clone(),
            self.worker_ids.clone(),
            self.repeated_pairs.clone(),
        )
    }

    pub fn num_units(&self) -> usize {
        self.num_units
    }

    pub fn num_workers(&self) -> usize {
        self.num_workers
    }

    pub fn scale(&self) -> &OrdinalScale {
        &self.scale
    }

    pub fn score(&self, unit: usize, worker: usize) -> i32 {
        self.scores[unit * self.num_workers + worker]
    }

    pub fn row(&self, unit: usize) -> &[i32] {
        let start = unit * self.num_workers;
        &self.scores[start..start + self.num_workers]
    }

    pub fn scores(&self) -> &[i32] {
        &self.scores
    }

    pub fn unit_ids(&self) -> &[String] {
        &self.unit_ids
    }

    pub fn worker_ids(&self) -> &[String] {
        &self.worker_ids
    }

    pub fn repeated_pairs(&self) -> &[(usize, usize)] {
        &self.repeated_pairs
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn rejects_off_scale_scores() {
        let err = FeedbackMatrix::new(
            vec![-1, 1, 0, 1],
            OrdinalScale::binary(),
            ids("u", 2),
            ids("w", 2),
            vec![],
        )
        .unwrap_err();
        assert!(err.to_string().contains("u1"));
    }

    #[test]
    fn rejects_bad_pairs() {
        let mk = |pairs| {
            FeedbackMatrix::new(vec![1; 6], OrdinalScale::binary(), ids("u", 3), ids("w", 2), pairs)
        };
        assert!(mk(vec![(1, 0)]).is_err());
        assert!(mk(vec![(1, 1)]).is_err());
        assert!(mk(vec![(0, 3)]).is_err());
        assert!(mk(vec![(0, 2)]).is_ok());
    }

    #[test]
    fn row_access() {
        let m = FeedbackMatrix::new(
            vec![-1, 1, 1, -1],
            OrdinalScale::binary(),
            ids("u", 2),
            ids("w", 2),
            vec![],
        )
        .unwrap();
        assert_eq!(m.row(1), &[1, -1]);
        assert_eq!(m.score(0, 1), 1);
        assert!(m.mask().iter().all(|&b| b));
    }
}
