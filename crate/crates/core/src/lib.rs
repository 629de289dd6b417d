//! Aggregation of granular ordinal feedback.
//!
//! The crate covers the whole path from a table of crowd scores to the
//! numbers behind a "how many individuals does a policy need" comparison:
//!
//! - [`feedback`]: ordinal scales, feedback matrices, empirical CDFs,
//!   worker splits, environments and granularity coarsening.
//! - [`losses`]: the cumulative log loss over CDF thresholds, the
//!   standard log loss and the two preference losses.
//! - [`nn`]: a small from-scratch MLP with a softmax / prefix-sum CDF head,
//!   trained with AdamW, dropout, batch normalization and early stopping.
//! - [`policies`]: regularized averaging, the supervised CDF learner and its
//!   per-threshold binarized variant.
//! - [`evaluation`]: loss curves over the number of individuals, environment
//!   bootstrap and matching-curve inversion.
//! - [`data`]: CSV ingestion, worker-noise statistics and a synthetic
//!   exchangeable population generator.
//! - [`pipeline`]: end-to-end experiment runs producing results files.

pub mod data;
pub mod error;
pub mod evaluation;
pub mod feedback;
pub mod isotonic;
pub mod losses;
pub mod nn;
pub mod pipeline;
pub mod policies;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
pub use feedback::{Cdf, FeedbackMatrix, OrdinalScale, Pmf};
