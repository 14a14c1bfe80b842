use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Failure;

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

/// Provenance record written next to every output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub flags: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub seed: u64,
    pub outputs: Vec<PathBuf>,
    pub wall_time_secs: f64,
    pub version: String,
    /// Subcommand-specific facts worth keeping, such as class weights.
    #[serde(skip_serializing_if = "serde_json::Map::is_empty")]
    pub notes: serde_json::Map<String, serde_json::Value>,
}

fn digest_file(path: &Path) -> Result<InputDigest, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::data(format!("reading {}: {e}", path.display())))?;
    Ok(InputDigest {
        path: path.to_path_buf(),
        sha256: Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect(),
        bytes: bytes.len() as u64,
    })
}

/// Digests a file, or every regular file directly inside a directory
/// (skipping earlier manifests), in name order.
pub fn digest_inputs(path: &Path) -> Result<Vec<InputDigest>, Failure> {
    if !path.is_dir() {
        return Ok(vec![digest_file(path)?]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| Failure::data(format!("listing {}: {e}", path.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && !p.to_string_lossy().ends_with("manifest.json"))
        .collect();
    files.sort();
    files.iter().map(|p| digest_file(p)).collect()
}

/// `<dir>/manifest.json` for directories, `<file>.manifest.json` otherwise.
pub fn manifest_path(output: &Path) -> PathBuf {
    if output.is_dir() {
        output.join("manifest.json")
    } else {
        let mut s = output.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }
}

impl RunManifest {
    pub fn write_beside(&self, output: &Path) -> Result<PathBuf, Failure> {
        let path = manifest_path(output);
        let body = serde_json::to_string_pretty(self).map_err(|e| Failure::data(e.to_string()))?;
        std::fs::write(&path, body).map_err(|e| Failure::data(format!("writing {}: {e}", path.display())))?;
        Ok(path)
    }
}
