//! JSON manifest listing every artifact of a run with its checksum.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    /// Path relative to the output directory.
    pub path: PathBuf,
    /// `csv`, `snapshot`, `ensemble`, `heatmap` or `report`.
    pub kind: String,
    pub scenario: String,
    /// Parameters specific to this artifact (η, D, kick number, ...).
    pub parameters: serde_json::Value,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario: String,
    /// The fully resolved configuration of the run.
    pub config: serde_json::Value,
    pub artifacts: Vec<ArtifactEntry>,
}

/// Hex SHA-256 of a file's contents.
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

impl Manifest {
    pub fn new(scenario: impl Into<String>, config: serde_json::Value) -> Self {
        Manifest {
            scenario: scenario.into(),
            config,
            artifacts: Vec::new(),
        }
    }

    /// Records `relative` (already written under `dir`) with its checksum.
    pub fn add(&mut self, dir: &Path, relative: impl Into<PathBuf>, kind: &str, parameters: serde_json::Value) -> Result<()> {
        let relative = relative.into();
        let sha256 = sha256_file(&dir.join(&relative))?;
        self.artifacts.push(ArtifactEntry {
            path: relative,
            kind: kind.to_string(),
            scenario: self.scenario.clone(),
            parameters,
            sha256,
        });
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    /// Paths whose current checksum differs from the recorded one.
    pub fn verify(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut bad = Vec::new();
        for a in &self.artifacts {
            if sha256_file(&dir.join(&a.path))? != a.sha256 {
                bad.push(a.path.clone());
            }
        }
        Ok(bad)
    }
}
