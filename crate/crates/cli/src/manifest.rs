//! Run manifests: the command line, seed, and hashes of inputs and outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

impl FileHash {
    pub fn of(path: &Path) -> std::io::Result<Self> {
        Ok(Self { path: path.display().to_string(), sha256: sha256_file(path)? })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments after the program name, as given.
    pub args: Vec<String>,
    pub seed: Option<u64>,
    pub config: Option<serde_json::Value>,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

impl Manifest {
    pub fn read(path: &Path) -> std::io::Result<Self> {
        serde_json::from_slice(&std::fs::read(path)?).map_err(std::io::Error::other)
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self).map_err(std::io::Error::other)?;
        bytes.push(b'\n');
        std::fs::write(path, bytes)
    }

    /// Inputs whose current hash differs from the recorded one.
    pub fn changed_inputs(&self) -> Vec<String> {
        self.inputs
            .iter()
            .filter(|f| sha256_file(Path::new(&f.path)).ok().as_deref() != Some(f.sha256.as_str()))
            .map(|f| f.path.clone())
            .collect()
    }

    /// Outputs whose current hash differs from `other`'s record.
    pub fn differing_outputs(&self, other: &Manifest) -> Vec<String> {
        let mut out = Vec::new();
        for f in &self.outputs {
            if other.outputs.iter().find(|g| g.path == f.path).map(|g| &g.sha256) != Some(&f.sha256) {
                out.push(f.path.clone());
            }
        }
        out
    }
}

/// Manifest location for a run writing `out`: inside it when it is a
/// directory output, otherwise `<out>.manifest.json`.
pub fn manifest_path(out: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        out.join("manifest.json")
    } else {
        let mut s = out.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }
}
