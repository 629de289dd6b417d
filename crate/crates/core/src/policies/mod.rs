//! Aggregation policies: each maps the first K input-set scores of a unit
//! (in environment order) to a predictive CDF.

mod regavg;
mod sl;
mod slb;

use serde::{Deserialize, Serialize};

pub use regavg::{regavg_predict, tune_gamma, GammaTuneResult, RegAvgPolicy, GAMMA_GRID};
pub use sl::{sl_dataset, SlPolicy};
pub use slb::{binarized_inputs, project_to_cdf, SlbPolicy};

use crate::error::{Error, Result};
use crate::feedback::{Cdf, EnvironmentView};

/// A fitted aggregation policy.
pub trait Policy: Sync {
    fn name(&self) -> &str;

    /// Predictive CDF for `unit` from the first `k` workers of the view's
    /// environment.
    fn predict(&self, view: &EnvironmentView<'_>, k: usize, unit: usize) -> Result<Cdf>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    RegAvg,
    Sl,
    Slb,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::RegAvg => "regavg",
            PolicyKind::Sl => "sl",
            PolicyKind::Slb => "slb",
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "regavg" => Ok(PolicyKind::RegAvg),
            "sl" => Ok(PolicyKind::Sl),
            "slb" => Ok(PolicyKind::Slb),
            other => Err(Error::invalid(format!("unknown policy `{other}`, expected regavg | sl | slb"))),
        }
    }
}
