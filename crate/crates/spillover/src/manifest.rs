//! Run manifest: everything needed to reproduce a run's outputs.
//!
//! Paths are recorded by file name only and no clock or worker count is
//! stored, so identical runs produce identical manifests.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Command-specific options not in the config (e.g. the sequence
    /// category).
    pub options: BTreeMap<String, String>,
    pub config: RunConfig,
    /// Keyed by role (`visits`, `plugins`, `panel/visitors.csv`, ...).
    pub inputs: BTreeMap<String, FileDigest>,
    pub seeds: BTreeMap<String, u64>,
    /// Output file name to sha256.
    pub outputs: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Manifest {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            command: command.to_string(),
            options: BTreeMap::new(),
            config: config.clone(),
            inputs: BTreeMap::new(),
            seeds: BTreeMap::new(),
            outputs: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn add_input(&mut self, role: &str, path: &Path) -> Result<()> {
        let digest = FileDigest {
            file: file_name(path),
            sha256: sha256_file(path)?,
        };
        self.inputs.insert(role.to_string(), digest);
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        self.outputs.insert(file_name(path), sha256_file(path)?);
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Internal(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
    }
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("x.csv");
        std::fs::write(&f, "abc").unwrap();
        let mut m = Manifest::new("ingest", &RunConfig::default());
        m.add_input("visits", &f).unwrap();
        m.add_output(&f).unwrap();
        m.seeds.insert("analysis".into(), 1);
        assert_eq!(
            m.outputs["x.csv"],
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        m.write(dir.path()).unwrap();
        assert_eq!(Manifest::read(&dir.path().join(MANIFEST)).unwrap(), m);
    }
}
