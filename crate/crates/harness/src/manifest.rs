//! Run manifests: what produced every file of an output directory.

use std::fs;
use std::path::Path;

use mackrl_core::trainer::RunConfig;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Content hash of the sources this binary was built from.
pub const CODE_HASH: &str = env!("MACKRL_CODE_HASH");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the manifest's directory.
    pub path: String,
    pub kind: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_hash: String,
    pub package_version: String,
    pub command: String,
    pub config: RunConfig,
    pub seeds: Vec<u64>,
    /// Swept parameter path and values, for sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<(String, Vec<serde_json::Value>)>,
    pub outputs: Vec<OutputFile>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig, seeds: Vec<u64>) -> Self {
        RunManifest {
            code_hash: CODE_HASH.to_string(),
            package_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: config.clone(),
            seeds,
            sweep: None,
            outputs: Vec::new(),
        }
    }

    pub fn add(&mut self, path: impl Into<String>, kind: &str, seed: u64) {
        self.outputs.push(OutputFile {
            path: path.into(),
            kind: kind.to_string(),
            seed,
        });
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| HarnessError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
