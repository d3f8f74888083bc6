//! Versioned JSON checkpoints.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::network::{Architecture, Network, Param};
use crate::train::TrainConfig;
use crate::NeuralError;

pub const CHECKPOINT_FORMAT: &str = "cvbench-network";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub architecture: Architecture,
    pub params: Vec<Param>,
    pub train_config: TrainConfig,
    pub seed: u64,
    /// Free-form run description (feature layout, data split, ...).
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn new(network: &Network, train_config: TrainConfig, seed: u64, metadata: BTreeMap<String, String>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            architecture: network.architecture().clone(),
            params: network.params().to_vec(),
            train_config,
            seed,
            metadata,
        }
    }

    pub fn network(&self) -> Result<Network, NeuralError> {
        Network::from_params(self.architecture.clone(), self.params.clone())
    }

    pub fn to_json(&self) -> Result<String, NeuralError> {
        serde_json::to_string_pretty(self).map_err(|e| NeuralError::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, NeuralError> {
        let ckpt: Checkpoint = serde_json::from_str(text).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(NeuralError::Checkpoint(format!(
                "unexpected format tag {:?}",
                ckpt.format
            )));
        }
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(NeuralError::Checkpoint(format!(
                "unsupported checkpoint version {}",
                ckpt.version
            )));
        }
        ckpt.network()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        std::fs::write(path, self.to_json()?).map_err(|e| NeuralError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| NeuralError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
