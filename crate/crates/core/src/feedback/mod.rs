//! Domain types for ordinal feedback: scales, score matrices, CDFs, worker
//! splits, environments and granularity coarsening.

mod cdf;
mod coarsen;
mod matrix;
mod scale;
mod split;

pub use cdf::{empirical_cdf, Cdf, Pmf, CDF_TOLERANCE};
pub use coarsen::{
    coarsen_5pt, coarsen_5pt_label, coarsen_binary, Granularity, ELEVEN_TO_FIVE,
};
pub use matrix::FeedbackMatrix;
pub use scale::OrdinalScale;
pub use split::{
    output_cdf, output_cdfs, prior_q0, sample_environments, split_workers, EnvRole,
    Environment, EnvironmentView, WorkerSplit,
};
