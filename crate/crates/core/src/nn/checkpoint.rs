use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Network;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const FORMAT: &str = "granular-mlp";

/// On-disk form of a trained network: layer parameters, running statistics
/// and the originating config, as JSON with exact float round-trips.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub network: Network,
}

impl Checkpoint {
    pub fn new(network: Network) -> Self {
        Self {
            format: FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            network,
        }
    }
}

pub fn save_checkpoint(net: &Network, path: &Path) -> Result<()> {
    let json = serde_json::to_string(&Checkpoint::new(net.clone())).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Network> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })?;
    if ckpt.format != FORMAT || ckpt.version != CHECKPOINT_VERSION {
        return Err(Error::data(format!(
            "{}: unsupported checkpoint {} v{}",
            path.display(),
            ckpt.format,
            ckpt.version
        )));
    }
    ckpt.network.config().validate()?;
    ckpt.network.check_shapes()?;
    Ok(ckpt.network)
}
