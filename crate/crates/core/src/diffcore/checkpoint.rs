use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MlpSpec, Network, ParamSet};
use crate::{Error, Result};

/// On-disk form of one network: its architecture plus named parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub spec: MlpSpec,
    pub params: ParamSet,
}

impl Checkpoint {
    pub fn from_network(net: &Network) -> Self {
        Self {
            spec: net.spec.clone(),
            params: net.params.clone(),
        }
    }

    pub fn into_network(self) -> Result<Network> {
        self.params.validate_for(&self.spec)?;
        for (name, tensor) in self.params.iter() {
            tensor
                .ensure_finite(name)
                .map_err(|e| Error::decode(name.clone(), e.to_string()))?;
        }
        Ok(Network {
            spec: self.spec,
            params: self.params,
        })
    }
}

pub fn save_network(net: &Network, path: &Path) -> Result<()> {
    let ckpt = Checkpoint::from_network(net);
    let json = serde_json::to_string_pretty(&ckpt)?;
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_network(path: &Path) -> Result<Network> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ckpt: Checkpoint = serde_json::from_str(&raw).map_err(|e| {
        Error::decode(
            path.display().to_string(),
            format!("not a valid checkpoint: {e}"),
        )
    })?;
    ckpt.into_network()
}
