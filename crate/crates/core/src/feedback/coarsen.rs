//! Granularity coarsening of 11-point feedback into 5-point and binary
//! feedback.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{FeedbackMatrix, OrdinalScale};
use crate::error::{Error, Result};
use crate::seed::{rng_for, SeededRng};

/// Row `i` gives the probabilities of mapping 11-point score `i - 5` to the
/// 5-point scores `-2..=2`. Every column sums to 11/5.
pub const ELEVEN_TO_FIVE: [[f64; 5]; 11] = [
    [1.0, 0.0, 0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.8, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0, 0.0],
    [0.0, 0.4, 0.6, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.6, 0.4, 0.0],
    [0.0, 0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 0.8, 0.2],
    [0.0, 0.0, 0.0, 0.0, 1.0],
    [0.0, 0.0, 0.0, 0.0, 1.0],
];

/// Number of points on the feedback scale used in an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Granularity {
    Two,
    Five,
    Eleven,
}

impl Granularity {
    pub fn points(self) -> u8 {
        match self {
            Granularity::Two => 2,
            Granularity::Five => 5,
            Granularity::Eleven => 11,
        }
    }

    pub fn scale(self) -> OrdinalScale {
        match self {
            Granularity::Two => OrdinalScale::binary(),
            Granularity::Five => OrdinalScale::five_point(),
            Granularity::Eleven => OrdinalScale::eleven_point(),
        }
    }

    /// Coarsens an 11-point matrix to this granularity. Eleven is the
    /// identity; five uses the probabilistic table; two uses the sign rule.
    pub fn apply(self, matrix: &FeedbackMatrix, seed: u64) -> Result<FeedbackMatrix> {
        match self {
            Granularity::Eleven => {
                if matrix.scale() != &OrdinalScale::eleven_point() {
                    return Err(Error::invalid("11-point granularity needs an 11-point dataset"));
                }
                Ok(matrix.clone())
            }
            Granularity::Five => coarsen_5pt(matrix, seed),
            Granularity::Two => coarsen_binary(matrix, seed),
        }
    }
}

impl TryFrom<u8> for Granularity {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            2 => Ok(Granularity::Two),
            5 => Ok(Granularity::Five),
            11 => Ok(Granularity::Eleven),
            other => Err(Error::invalid(format!("granularity must be 2, 5 or 11, got {other}"))),
        }
    }
}

impl From<Granularity> for u8 {
    fn from(g: Granularity) -> u8 {
        g.points()
    }
}

impl std::str::FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v: u8 = s
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("granularity must be 2, 5 or 11, got `{s}`")))?;
        Granularity::try_from(v)
    }
}

/// Negative scores become -1, positive become +1, and zeros flip a fair coin.
pub fn coarsen_binary(matrix: &FeedbackMatrix, rng_seed: u64) -> Result<FeedbackMatrix> {
    let scale = matrix.scale();
    if !(scale.contains(0) || scale.is_symmetric()) {
        return Err(Error::invalid(
            "binary coarsening needs a scale that contains 0 or is symmetric about 0",
        ));
    }
    let mut rng = rng_for(rng_seed, "coarsen-binary", &[]);
    let scores = matrix
        .scores()
        .iter()
        .map(|&s| match s.signum() {
            -1 => -1,
            1 => 1,
            _ => {
                if rng.random_bool(0.5) {
                    1
                } else {
                    -1
                }
            }
        })
        .collect();
    matrix.with_scores(scores, OrdinalScale::binary())
}

/// Maps one 11-point label to the 5-point scale by sampling its table row.
pub fn coarsen_5pt_label(raw: i32, rng: &mut SeededRng) -> Result<i32> {
    if !(-5..=5).contains(&raw) {
        return Err(Error::invalid(format!("{raw} is not an 11-point label")));
    }
    let row = &ELEVEN_TO_FIVE[(raw + 5) as usize];
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (j, &p) in row.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        last_nonzero = j;
        acc += p;
        if u < acc {
            return Ok(j as i32 - 2);
        }
    }
    Ok(last_nonzero as i32 - 2)
}

pub fn coarsen_5pt(matrix: &FeedbackMatrix, rng_seed: u64) -> Result<FeedbackMatrix> {
    if matrix.scale() != &OrdinalScale::eleven_point() {
        return Err(Error::invalid(format!(
            "5-point coarsening needs the 11-point scale, got {:?}",
            matrix.scale().raw_labels()
        )));
    }
    let mut rng = rng_for(rng_seed, "coarsen-5pt", &[]);
    let scores = matrix
        .scores()
        .iter()
        .map(|&s| coarsen_5pt_label(s, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    matrix.with_scores(scores, OrdinalScale::five_point())
}
