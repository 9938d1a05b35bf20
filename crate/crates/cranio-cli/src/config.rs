//! The JSON config file: pipeline geometry, the network ladder of the
//! stage being trained, and the optimizer settings.

use std::path::Path;

use cranio_core::nn::train::TrainConfig;
use cranio_core::nn::NetworkConfig;
use cranio_core::pipeline::{configs, PipelineConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigFile {
    pub pipeline: PipelineConfig,
    pub network: NetworkConfig,
    pub train: TrainConfig,
}

impl ConfigFile {
    /// Desk-scale defaults for the coarse stage.
    pub fn desk_coarse() -> Self {
        let pipeline = PipelineConfig::desk_scale();
        let network = configs::desk_n1(pipeline.coarse_dims);
        Self {
            pipeline,
            network,
            train: TrainConfig::default(),
        }
    }

    /// Desk-scale defaults for the fine stage.
    pub fn desk_fine() -> Self {
        let pipeline = PipelineConfig::desk_scale();
        let network = configs::desk_n2(pipeline.fine_canvas_dims);
        Self {
            pipeline,
            network,
            train: TrainConfig::default(),
        }
    }
}

/// Parsed config plus the hash of the file it came from.
pub struct LoadedConfig {
    pub config: ConfigFile,
    pub sha256: String,
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::data(&format!("reading {}", path.display()), e))?;
    let config: ConfigFile = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::data(&format!("parsing {}", path.display()), e))?;
    config
        .network
        .validate()
        .map_err(|e| CliError::data(&format!("network config in {}", path.display()), e))?;
    Ok(LoadedConfig {
        config,
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

pub fn save_config(path: &Path, config: &ConfigFile) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(config)
        .map_err(|e| CliError::data("serializing config", e))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| CliError::data(&format!("writing {}", path.display()), e))?;
    Ok(())
}
