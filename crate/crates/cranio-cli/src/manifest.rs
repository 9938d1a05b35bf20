//! Run manifests: enough provenance in every output directory to
//! reproduce the command that wrote it.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::CliError;

pub const MANIFEST_NAME: &str = "run_manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    /// The subcommand and its arguments as invoked.
    pub command: Vec<String>,
    pub config_path: Option<String>,
    pub config_sha256: Option<String>,
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub tool_version: String,
    /// Wall clock; informational only, excluded from determinism claims.
    pub duration_seconds: f64,
}

/// Collects manifest fields while a command runs.
pub struct ManifestBuilder {
    manifest: RunManifest,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: Vec<String>) -> Self {
        Self {
            manifest: RunManifest {
                command,
                config_path: None,
                config_sha256: None,
                seed: None,
                inputs: Vec::new(),
                outputs: Vec::new(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                duration_seconds: 0.0,
            },
            started: Instant::now(),
        }
    }

    pub fn config(&mut self, path: &Path, sha256: &str) -> &mut Self {
        self.manifest.config_path = Some(path.display().to_string());
        self.manifest.config_sha256 = Some(sha256.to_string());
        self
    }

    pub fn seed(&mut self, seed: u64) -> &mut Self {
        self.manifest.seed = Some(seed);
        self
    }

    pub fn input(&mut self, path: &Path) -> &mut Self {
        self.manifest.inputs.push(path.display().to_string());
        self
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.manifest.outputs.push(path.display().to_string());
        self
    }

    /// Writes `run_manifest.json` into `dir`.
    pub fn write(mut self, dir: &Path) -> Result<(), CliError> {
        self.manifest.duration_seconds = self.started.elapsed().as_secs_f64();
        let mut text = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| CliError::data("serializing manifest", e))?;
        text.push('\n');
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(MANIFEST_NAME), text)?;
        Ok(())
    }
}
