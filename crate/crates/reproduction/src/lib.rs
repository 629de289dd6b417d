//! Shared pieces of the acceptance target: a small criterion runner and the
//! independent oracles the checks compare against.

use std::time::{Duration, Instant};

use granular::{Cdf, OrdinalScale};

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

impl Outcome {
    /// `Pass(detail)` when `ok`, otherwise `Fail(detail)`.
    pub fn check(ok: bool, detail: impl Into<String>) -> Self {
        if ok {
            Outcome::Pass(detail.into())
        } else {
            Outcome::Fail(detail.into())
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Outcome::Pass(_) => "PASS",
            Outcome::Fail(_) => "FAIL",
            Outcome::Skip(_) => "SKIP",
        }
    }

    fn detail(&self) -> &str {
        match self {
            Outcome::Pass(d) | Outcome::Fail(d) | Outcome::Skip(d) => d,
        }
    }
}

pub struct Report {
    pub number: usize,
    pub title: &'static str,
    pub outcome: Outcome,
    pub elapsed: Duration,
}

impl Report {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {} [{:.2?}] {}: {}",
            self.number,
            self.outcome.label(),
            self.elapsed,
            self.title,
            self.outcome.detail()
        )
    }
}

/// Runs one criterion, turning a panic into a failure. A `budget`, when
/// given, is part of the criterion: overrunning it fails.
pub fn run(number: usize, title: &'static str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) -> Report {
    let start = Instant::now();
    let outcome = match std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Outcome::Fail(format!("panic: {msg}"))
        }
    };
    let elapsed = start.elapsed();
    let outcome = match (outcome, budget) {
        (Outcome::Pass(d), Some(b)) if elapsed > b => Outcome::Fail(format!("{d}; took {elapsed:.2?}, budget {b:.2?}")),
        (o, _) => o,
    };
    Report {
        number,
        title,
        outcome,
        elapsed,
    }
}

/// Regularized average written out term by term: for each threshold y,
/// gamma Q0(y) + (1 - gamma) * #{k : Y_k <= y} / K.
pub fn brute_force_regavg(q0: &[f64], gamma: f64, scores: &[i32], scale: &OrdinalScale) -> Vec<f64> {
    scale
        .raw_labels()
        .iter()
        .zip(q0)
        .map(|(&y, &p)| {
            let mut below = 0usize;
            for &s in scores {
                if s <= y {
                    below += 1;
                }
            }
            gamma * p + (1.0 - gamma) * (below as f64 / scores.len() as f64)
        })
        .collect()
}

/// Smallest support point whose cumulative probability reaches `q`.
pub fn discrete_quantile(support: &[(f64, f64)], q: f64) -> f64 {
    let mut pts = support.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut acc = 0.0;
    for &(v, p) in &pts {
        acc += p;
        if acc >= q - 1e-12 {
            return v;
        }
    }
    pts[pts.len() - 1].0
}

/// Exact law of the bootstrap mean of two values: both draws of `a`, one of
/// each, or both of `b`.
pub fn two_env_bootstrap_law(a: f64, b: f64) -> Vec<(f64, f64)> {
    vec![(a, 0.25), ((a + b) / 2.0, 0.5), (b, 0.25)]
}

/// Nondecreasing, inside [0, 1] and ending at 1, each to `tol`.
pub fn is_valid_cdf(cdf: &Cdf, tol: f64) -> bool {
    let v = cdf.values();
    !v.is_empty()
        && v.iter().all(|x| x.is_finite() && *x >= -tol && *x <= 1.0 + tol)
        && v.windows(2).all(|w| w[1] >= w[0] - tol)
        && (v[v.len() - 1] - 1.0).abs() <= tol
}
