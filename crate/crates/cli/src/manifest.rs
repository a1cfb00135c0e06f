//! Run manifests: every pipeline invocation records its inputs, config
//! hash, seed, versions, and output hashes so a run can be reproduced and
//! verified byte for byte.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub versions: BTreeMap<String, String>,
    /// Input file name -> sha256.
    pub inputs: BTreeMap<String, String>,
    /// Output file name -> sha256.
    pub outputs: BTreeMap<String, String>,
    /// Wall-clock time of the run; the only non-reproducible field.
    pub wall_time_unix: u64,
}

fn file_key(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex_digest(&bytes))
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config: &PipelineConfig) -> Self {
        let config_text = toml::to_string(config).expect("config serializes");
        let mut versions = BTreeMap::new();
        versions.insert(
            "understory".to_string(),
            env!("CARGO_PKG_VERSION").to_string(),
        );
        Self {
            command: command.to_string(),
            seed,
            config_hash: hex_digest(config_text.as_bytes()),
            versions,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            wall_time_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn record_input(&mut self, path: &Path) -> std::io::Result<()> {
        self.inputs.insert(file_key(path), sha256_file(path)?);
        Ok(())
    }

    pub fn record_output(&mut self, path: &Path) -> std::io::Result<()> {
        self.outputs.insert(file_key(path), sha256_file(path)?);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self).expect("manifest serializes"))
    }
}
