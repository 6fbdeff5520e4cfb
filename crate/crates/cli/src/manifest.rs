//! Per-stage run manifests: inputs with their digests, the config hash and
//! tool version, outputs, and stage-specific parameters.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{hex_digest, PipelineConfig};
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<String>,
    pub parameters: BTreeMap<String, serde_json::Value>,
}

impl Manifest {
    pub fn new(stage: &str, cfg: &PipelineConfig) -> Self {
        Self {
            stage: stage.to_string(),
            tool: "morphoscope".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: cfg.hash(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            parameters: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.inputs.push(FileDigest { path: path.display().to_string(), sha256: hex_digest(&bytes) });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        self.parameters.insert(key.to_string(), serde_json::to_value(value).expect("manifest value"));
    }

    /// Writes `<dir>/manifests/<name>.json` and returns its path.
    pub fn write(&self, dir: &Path, name: &str) -> Result<PathBuf, CliError> {
        let mdir = dir.join("manifests");
        std::fs::create_dir_all(&mdir).map_err(|e| CliError::io(&mdir, e))?;
        let path = mdir.join(format!("{name}.json"));
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
