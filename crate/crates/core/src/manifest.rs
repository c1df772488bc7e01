//! Run manifests: what was run, with which settings, and what it wrote.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// Every resolved option of the run.
    pub config: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub threads: usize,
    pub duration_secs: f64,
    /// SHA-256 of each artifact, keyed by path relative to `out_dir`.
    pub checksums: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, out_dir: &Path, seed: u64, threads: usize) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            inputs: Vec::new(),
            out_dir: out_dir.to_path_buf(),
            seed,
            threads,
            duration_secs: 0.0,
            checksums: BTreeMap::new(),
        }
    }

    /// Hashes every artifact under `out_dir` (except an existing manifest).
    pub fn record_artifacts(&mut self) -> Result<()> {
        self.checksums.clear();
        let mut stack = vec![self.out_dir.clone()];
        while let Some(dir) = stack.pop() {
            for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
                let path = entry.map_err(|e| Error::io(&dir, e))?.path();
                if path.is_dir() {
                    stack.push(path);
                    continue;
                }
                let rel = path.strip_prefix(&self.out_dir).unwrap_or(&path).to_string_lossy().replace('\\', "/");
                if rel == MANIFEST_NAME {
                    continue;
                }
                self.checksums.insert(rel, sha256_file(&path)?);
            }
        }
        Ok(())
    }

    pub fn finish(&mut self, elapsed: Duration) -> Result<PathBuf> {
        self.duration_secs = elapsed.as_secs_f64();
        self.record_artifacts()?;
        let path = self.out_dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}
