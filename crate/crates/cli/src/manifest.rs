//! Provenance records written next to every command output.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name, replayable as-is.
    pub argv: Vec<String>,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
    pub input_digests: BTreeMap<String, String>,
    /// Digests of the deterministic outputs only; timing reports are left out.
    pub output_digests: BTreeMap<String, String>,
    pub version: String,
    pub wall_time_seconds: f64,
}

pub fn sha256_file(path: &Path) -> Result<String, Failure> {
    let mut file = fs::File::open(path)
        .map_err(|e| Failure::invalid(format!("cannot read {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = file
            .read(&mut buf)
            .map_err(|e| Failure::invalid(format!("cannot read {}: {e}", path.display())))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

pub fn digests(paths: &[&Path]) -> Result<BTreeMap<String, String>, Failure> {
    paths
        .iter()
        .map(|p| Ok((p.display().to_string(), sha256_file(p)?)))
        .collect()
}

/// `<output>.manifest.json`, next to the primary output.
pub fn manifest_path(primary: &Path) -> PathBuf {
    let mut name = primary.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

impl RunManifest {
    pub fn write(&self, primary: &Path) -> Result<PathBuf, Failure> {
        let path = manifest_path(primary);
        let text =
            serde_json::to_string_pretty(self).map_err(|e| Failure::invalid(e.to_string()))?;
        fs::write(&path, text)
            .map_err(|e| Failure::invalid(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::invalid(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::invalid(format!("malformed manifest {}: {e}", path.display())))
    }
}
