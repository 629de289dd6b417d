//! Loss curves over K, environment bootstrap, matching curves and the
//! advantage ratio.

mod bootstrap;
mod curve;
mod matching;

pub use bootstrap::{bootstrap_ci, bootstrap_samples, BootstrapConfig};
pub use curve::{run_experiment, LossCurve};
pub use matching::{advantage, invert_curves, matching_curve, uniform_grid, MatchingCurve};
