use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::FeedbackMatrix;
use crate::stats::{mean, percentile_sorted, std_population};

/// Mean absolute change of each worker's score across repeated units, and
/// its summary over workers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseStats {
    pub per_worker_delta: Vec<(String, f64)>,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub max: f64,
}

impl NoiseStats {
    pub fn from_deltas(per_worker_delta: Vec<(String, f64)>) -> Result<Self> {
        if per_worker_delta.is_empty() {
            return Err(Error::invalid("no workers"));
        }
        let values: Vec<f64> = per_worker_delta.iter().map(|(_, d)| *d).collect();
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            mean: mean(&values),
            std: std_population(&values),
            min: sorted[0],
            p25: percentile_sorted(&sorted, 0.25),
            median: percentile_sorted(&sorted, 0.5),
            p75: percentile_sorted(&sorted, 0.75),
            max: sorted[sorted.len() - 1],
            per_worker_delta,
        })
    }
}

/// `Delta_k = sum over repeated pairs of |Y_{tau,k} - Y_{tau',k}| / |I|`,
/// on raw labels.
pub fn noise_stats(matrix: &FeedbackMatrix) -> Result<NoiseStats> {
    let pairs = matrix.repeated_pairs();
    if pairs.is_empty() {
        return Err(Error::invalid("the dataset lists no repeated task units"));
    }
    let deltas = matrix
        .worker_ids()
        .iter()
        .enumerate()
        .map(|(k, id)| {
            let total: i64 = pairs
                .iter()
                .map(|&(a, b)| i64::from((matrix.score(a, k) - matrix.score(b, k)).abs()))
                .sum();
            (id.clone(), total as f64 / pairs.len() as f64)
        })
        .collect();
    NoiseStats::from_deltas(deltas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::OrdinalScale;

    fn matrix(scores: Vec<i32>, units: usize, workers: usize, pairs: Vec<(usize, usize)>) -> FeedbackMatrix {
        FeedbackMatrix::new(
            scores,
            OrdinalScale::eleven_point(),
            (0..units).map(|i| i.to_string()).collect(),
            (0..workers).map(|i| i.to_string()).collect(),
            pairs,
        )
        .unwrap()
    }

    #[test]
    fn hand_value() {
        // Units 0/1 and 2/3 repeat; the worker answers (3, 3) and (-2, 0).
        let m = matrix(vec![3, 3, -2, 0], 4, 1, vec![(0, 1), (2, 3)]);
        let s = noise_stats(&m).unwrap();
        assert_eq!(s.per_worker_delta[0].1, 1.0);
    }

    #[test]
    fn identical_repeats_give_zero() {
        let m = matrix(vec![1, -4, 1, -4, 5, 5], 3, 2, vec![(0, 1)]);
        let s = noise_stats(&m).unwrap();
        for v in [s.mean, s.std, s.min, s.p25, s.median, s.p75, s.max] {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn no_repeats_is_input_error() {
        let m = matrix(vec![1, 2], 2, 1, vec![]);
        assert!(noise_stats(&m).unwrap_err().is_input_error());
    }

    #[test]
    fn summary_is_recomputable() {
        let deltas: Vec<(String, f64)> = [0.45, 1.0, 1.5, 2.0, 4.18].iter().enumerate().map(|(i, &d)| (i.to_string(), d)).collect();
        let s = NoiseStats::from_deltas(deltas.clone()).unwrap();
        let again = NoiseStats::from_deltas(s.per_worker_delta.clone()).unwrap();
        assert_eq!(s, again);
        assert!((s.median - 1.5).abs() < 1e-12);
        assert!((s.p25 - 1.0).abs() < 1e-12);
        assert_eq!(s.max, 4.18);
    }
}
