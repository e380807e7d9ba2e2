//! Run manifests written beside every artifact.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use mmof::algos::CHECKPOINT_VERSION;
use mmof::dataset::{file_hash, FORMAT_VERSION};

use crate::error::CliError;

#[derive(Serialize)]
struct Versions {
    mmof: &'static str,
    dataset_format: u32,
    checkpoint_format: u32,
}

#[derive(Serialize)]
pub struct Manifest {
    command: String,
    versions: Versions,
    config: Value,
    config_hash: String,
    seed: Option<u64>,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, config: &impl Serialize, seed: Option<u64>) -> Self {
        let config = serde_json::to_value(config).expect("config serializes");
        let bytes = serde_json::to_vec(&config).expect("config serializes");
        Manifest {
            command: command.to_string(),
            versions: Versions {
                mmof: env!("CARGO_PKG_VERSION"),
                dataset_format: FORMAT_VERSION,
                checkpoint_format: CHECKPOINT_VERSION,
            },
            config,
            config_hash: hex::encode(Sha256::digest(&bytes)),
            seed,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs.insert(path.display().to_string(), file_hash(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<(), CliError> {
        self.outputs.insert(path.display().to_string(), file_hash(path)?);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        write_file(path, json.as_bytes())
    }
}

/// `<file>.manifest.json` for a single-file artifact.
pub fn beside(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Write through a temporary sibling so that readers never see a partial file.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    ensure_parent(path)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent().filter(|d| !d.as_os_str().is_empty()) {
        Some(dir) => std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e)),
        None => Ok(()),
    }
}
