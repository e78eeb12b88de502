//! Run manifests: resolved configuration, seeds, checks and checksums.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::output::{sha256_hex, Artifact};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub point: usize,
    pub lane: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub master_seed: u64,
    /// Resolved configuration as TOML, absent for commands run without one.
    pub config: Option<String>,
    /// Whether `--check` gates were enforced.
    pub check: bool,
    pub status: String,
    pub seeds: Vec<SeedRecord>,
    pub checks: Vec<CheckRecord>,
    pub outputs: Vec<Artifact>,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::Manifest(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Manifest(format!("{}: {e}", path.display())))
    }
}

/// Files whose content no longer matches the manifest, with a reason each.
pub fn verify(manifest: &Manifest, dir: &Path) -> Vec<(String, String)> {
    let mut bad = Vec::new();
    for a in &manifest.outputs {
        match fs::read(dir.join(&a.file)) {
            Err(e) => bad.push((a.file.clone(), format!("unreadable: {e}"))),
            Ok(data) => {
                let sum = sha256_hex(&data);
                if sum != a.sha256 {
                    bad.push((a.file.clone(), format!("checksum {sum} != recorded {}", a.sha256)));
                } else if data.len() as u64 != a.bytes {
                    bad.push((a.file.clone(), "size differs".to_string()));
                }
            }
        }
    }
    bad
}
