//! Run manifests: tool version, seed, config echo and content hashes of the
//! inputs. Manifests are the only artifacts that carry timestamps.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{csvio::write_atomic, PipelineError, RunConfig};

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    /// Input path -> sha256 of the file contents.
    pub inputs: BTreeMap<String, String>,
    pub created_unix: u64,
}

pub fn sha256_file(path: &Path) -> Result<String, PipelineError> {
    let bytes = std::fs::read(path).map_err(|e| PipelineError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub fn write_manifest(
    path: &Path,
    command: &str,
    config: &RunConfig,
    inputs: &[&Path],
) -> Result<(), PipelineError> {
    let mut hashes = BTreeMap::new();
    for input in inputs {
        hashes.insert(input.display().to_string(), sha256_file(input)?);
    }
    let manifest = Manifest {
        tool: "gridrisk".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        seed: config.seed,
        config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
        inputs: hashes,
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| PipelineError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    write_atomic(path, text.as_bytes())
}

pub fn read_manifest(path: &Path) -> Result<Manifest, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
