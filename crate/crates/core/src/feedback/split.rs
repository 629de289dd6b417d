use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{empirical_cdf, Cdf, FeedbackMatrix};
use crate::error::{Error, Result};
use crate::seed::rng_for;

/// Partition of the workers into an input set (fed to policies) and an
/// output set (defines evaluation targets). Both lists are ascending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerSplit {
    pub input_set: Vec<usize>,
    pub output_set: Vec<usize>,
    pub seed: u64,
}

impl WorkerSplit {
    /// Builds a split from an explicit output set, validating the partition.
    pub fn from_output_set(num_workers: usize, mut output_set: Vec<usize>, seed: u64) -> Result<Self> {
        output_set.sort_unstable();
        output_set.dedup();
        if output_set.iter().any(|&w| w >= num_workers) {
            return Err(Error::invalid("output set index out of range"));
        }
        let input_set: Vec<usize> = (0..num_workers).filter(|w| output_set.binary_search(w).is_err()).collect();
        if input_set.is_empty() || output_set.is_empty() {
            return Err(Error::invalid("input and output sets must both be nonempty"));
        }
        Ok(Self {
            input_set,
            output_set,
            seed,
        })
    }

    pub fn input_len(&self) -> usize {
        self.input_set.len()
    }

    pub fn output_len(&self) -> usize {
        self.output_set.len()
    }
}

/// Samples `output_size` workers without replacement for the output set; the
/// rest form the input set.
pub fn split_workers(num_workers: usize, output_size: usize, seed: u64) -> Result<WorkerSplit> {
    if output_size == 0 || output_size >= num_workers {
        return Err(Error::invalid(format!(
            "output set size must be in 1..{num_workers}, got {output_size}"
        )));
    }
    let mut rng = rng_for(seed, "split-workers", &[]);
    let output = rand::seq::index::sample(&mut rng, num_workers, output_size).into_vec();
    WorkerSplit::from_output_set(num_workers, output, seed)
}

/// Which family of environments a permutation belongs to. The two roles use
/// disjoint seed streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvRole {
    Train,
    Eval,
}

impl EnvRole {
    fn tag(self) -> &'static str {
        match self {
            EnvRole::Train => "environment-train",
            EnvRole::Eval => "environment-eval",
        }
    }
}

/// A permutation of input-set positions; its length-K prefix selects the
/// workers a policy sees.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Environment {
    pub id: usize,
    pub perm: Vec<usize>,
}

impl Environment {
    pub fn identity(id: usize, len: usize) -> Self {
        Self {
            id,
            perm: (0..len).collect(),
        }
    }
}

/// Draws `count` uniform permutations of `0..len`. Environment `i` is seeded
/// from `(seed, role, i)` only.
pub fn sample_environments(len: usize, count: usize, seed: u64, role: EnvRole) -> Result<Vec<Environment>> {
    if len == 0 || count == 0 {
        return Err(Error::invalid("environments need len >= 1 and count >= 1"));
    }
    Ok((0..count)
        .map(|id| {
            let mut rng = rng_for(seed, role.tag(), &[id as u64]);
            let mut perm: Vec<usize> = (0..len).collect();
            perm.shuffle(&mut rng);
            Environment { id, perm }
        })
        .collect())
}

/// Read-only view tying a matrix, split and environment together so a policy
/// can look up the first `k` input workers for a unit.
#[derive(Clone, Copy, Debug)]
pub struct EnvironmentView<'a> {
    pub matrix: &'a FeedbackMatrix,
    pub split: &'a WorkerSplit,
    pub env: &'a Environment,
}

impl<'a> EnvironmentView<'a> {
    pub fn new(matrix: &'a FeedbackMatrix, split: &'a WorkerSplit, env: &'a Environment) -> Result<Self> {
        if env.perm.len() != split.input_len() {
            return Err(Error::invalid(format!(
                "environment {} permutes {} positions but the input set has {}",
                env.id,
                env.perm.len(),
                split.input_len()
            )));
        }
        Ok(Self { matrix, split, env })
    }

    /// Matrix column indices of the first `k` workers in environment order.
    pub fn workers(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        self.env.perm[..k].iter().map(|&p| self.split.input_set[p])
    }

    pub fn raw_scores(&self, unit: usize, k: usize) -> Vec<i32> {
        self.workers(k).map(|w| self.matrix.score(unit, w)).collect()
    }

    pub fn normalized_scores(&self, unit: usize, k: usize) -> Vec<f64> {
        let scale = self.matrix.scale();
        self.workers(k)
            .map(|w| scale.normalize(self.matrix.score(unit, w)).expect("matrix entries are on scale"))
            .collect()
    }

    pub fn check_k(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.split.input_len() {
            return Err(Error::invalid(format!(
                "K = {k} outside 1..={}",
                self.split.input_len()
            )));
        }
        Ok(())
    }
}

/// Empirical CDF of the output-set scores for one unit.
pub fn output_cdf(matrix: &FeedbackMatrix, split: &WorkerSplit, unit: usize) -> Result<Cdf> {
    let scores: Vec<i32> = split.output_set.iter().map(|&w| matrix.score(unit, w)).collect();
    empirical_cdf(&scores, matrix.scale())
}

pub fn output_cdfs(matrix: &FeedbackMatrix, split: &WorkerSplit) -> Result<Vec<Cdf>> {
    (0..matrix.num_units()).map(|t| output_cdf(matrix, split, t)).collect()
}

/// Prior CDF: the mean over all units of the output-set empirical CDFs.
pub fn prior_q0(matrix: &FeedbackMatrix, split: &WorkerSplit) -> Result<Cdf> {
    if split.output_set.is_empty() {
        return Err(Error::invalid("output set is empty"));
    }
    if split.output_set.iter().chain(&split.input_set).any(|&w| w >= matrix.num_workers()) {
        return Err(Error::invalid("split references workers outside the matrix"));
    }
    let cdfs = output_cdfs(matrix, split)?;
    let mut acc = vec![0.0; matrix.scale().len()];
    for c in &cdfs {
        for (a, v) in acc.iter_mut().zip(c.values()) {
            *a += v;
        }
    }
    let n = cdfs.len() as f64;
    Cdf::new(acc.into_iter().map(|a| a / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::OrdinalScale;

    fn matrix(scores: Vec<i32>, units: usize, workers: usize) -> FeedbackMatrix {
        FeedbackMatrix::new(
            scores,
            OrdinalScale::binary(),
            (0..units).map(|i| format!("u{i}")).collect(),
            (0..workers).map(|i| format!("w{i}")).collect(),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn paper_sized_split() {
        let s = split_workers(39, 19, 42).unwrap();
        assert_eq!(s.input_len(), 20);
        assert_eq!(s.output_len(), 19);
        let mut all: Vec<usize> = s.input_set.iter().chain(&s.output_set).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..39).collect::<Vec<_>>());
        assert_eq!(s, split_workers(39, 19, 42).unwrap());
    }

    #[test]
    fn forced_partition() {
        let s = split_workers(2, 1, 9).unwrap();
        assert_eq!(s.input_len(), 1);
        assert_eq!(s.output_len(), 1);
        assert_ne!(s.input_set, s.output_set);
        assert!(split_workers(2, 2, 0).is_err());
        assert!(split_workers(2, 0, 0).is_err());
    }

    #[test]
    fn single_position_environments_are_identity() {
        let envs = sample_environments(1, 5, 3, EnvRole::Eval).unwrap();
        assert!(envs.iter().all(|e| e.perm == vec![0]));
    }

    #[test]
    fn train_and_eval_streams_differ() {
        let a = sample_environments(20, 30, 1, EnvRole::Train).unwrap();
        let b = sample_environments(20, 30, 1, EnvRole::Eval).unwrap();
        assert_eq!(a.len(), 30);
        assert_ne!(a[0].perm, b[0].perm);
        assert_eq!(a, sample_environments(20, 30, 1, EnvRole::Train).unwrap());
    }

    #[test]
    fn prior_single_unit() {
        let m = matrix(vec![1, -1, 1], 1, 3);
        let split = WorkerSplit::from_output_set(3, vec![1, 2], 0).unwrap();
        assert_eq!(prior_q0(&m, &split).unwrap().values(), &[0.5, 1.0]);
    }

    #[test]
    fn prior_is_elementwise_mean() {
        // O_1 = (0, 1), O_2 = (1, 1)
        let m = matrix(vec![-1, 1, 1, -1, -1, -1], 2, 3);
        let split = WorkerSplit::from_output_set(3, vec![1, 2], 0).unwrap();
        assert_eq!(output_cdf(&m, &split, 0).unwrap().values(), &[0.0, 1.0]);
        assert_eq!(output_cdf(&m, &split, 1).unwrap().values(), &[1.0, 1.0]);
        assert_eq!(prior_q0(&m, &split).unwrap().values(), &[0.5, 1.0]);
    }

    #[test]
    fn prefixes_are_nested() {
        let m = matrix(vec![1; 5 * 6], 5, 6);
        let split = split_workers(6, 2, 1).unwrap();
        let envs = sample_environments(4, 3, 1, EnvRole::Eval).unwrap();
        for env in &envs {
            let view = EnvironmentView::new(&m, &split, env).unwrap();
            for k in 1..4 {
                let a: Vec<usize> = view.workers(k).collect();
                let b: Vec<usize> = view.workers(k + 1).collect();
                assert_eq!(&b[..k], &a[..]);
                assert!(a.iter().all(|w| split.input_set.contains(w)));
            }
            assert!(view.check_k(5).is_err());
            assert!(view.check_k(0).is_err());
        }
    }
}
