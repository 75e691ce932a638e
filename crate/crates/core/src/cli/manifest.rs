use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::file_digest;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub file: String,
    pub sha256: String,
}

/// Provenance record written next to every command's outputs. Holds no
/// timestamps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

fn basename(p: &Path) -> String {
    p.file_name()
        .map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

impl Manifest {
    pub fn new(command: &str, config_hash: &str, seed: u64) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config_hash.into(),
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path, sha256: String) {
        self.inputs.push(FileDigest {
            file: basename(path),
            sha256,
        });
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(FileDigest {
            file: basename(path),
            sha256: file_digest(path)?,
        });
        Ok(())
    }

    /// Writes `<primary>.manifest.json`, or `manifest.json` inside a run
    /// directory.
    pub fn write_beside(&self, primary: &Path) -> Result<PathBuf> {
        let target = if primary.is_dir() {
            primary.join("manifest.json")
        } else {
            let mut name = primary.as_os_str().to_owned();
            name.push(".manifest.json");
            PathBuf::from(name)
        };
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&target, text)?;
        Ok(target)
    }
}
