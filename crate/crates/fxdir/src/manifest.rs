//! Per-directory run manifests and the "nothing changed" check.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config_fingerprint: String,
    pub seed: u64,
    /// Relative path → SHA-256 of every file the command read.
    pub inputs: BTreeMap<String, String>,
    /// Relative path → SHA-256 of every file the command wrote.
    pub outputs: BTreeMap<String, String>,
}

fn relative(root: &Path, path: &Path) -> String {
    path.strip_prefix(root).unwrap_or(path).to_string_lossy().replace('\\', "/")
}

impl RunManifest {
    pub fn new(command: &str, config_fingerprint: String, seed: u64) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            command: command.to_string(),
            config_fingerprint,
            seed,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    /// Records `path` (keyed relative to `root`) as an input.
    pub fn input(&mut self, root: &Path, path: &Path) -> Result<()> {
        self.inputs.insert(relative(root, path), io::sha256_file(path)?);
        Ok(())
    }

    fn same_run(&self, other: &RunManifest) -> bool {
        self.tool_version == other.tool_version
            && self.command == other.command
            && self.config_fingerprint == other.config_fingerprint
            && self.seed == other.seed
            && self.inputs == other.inputs
    }

    /// True when `dir` already holds the outputs of exactly this run.
    pub fn up_to_date(&self, dir: &Path) -> bool {
        let Ok(text) = std::fs::read_to_string(dir.join(MANIFEST_FILE)) else { return false };
        let Ok(old) = serde_json::from_str::<RunManifest>(&text) else { return false };
        self.same_run(&old)
            && old
                .outputs
                .iter()
                .all(|(rel, hash)| io::sha256_file(&dir.join(rel)).is_ok_and(|h| &h == hash))
    }

    /// Hashes `outputs` and writes the manifest into `dir`.
    pub fn finish(mut self, dir: &Path, outputs: &[PathBuf]) -> Result<()> {
        for p in outputs {
            self.outputs.insert(relative(dir, p), io::sha256_file(p)?);
        }
        io::write_json(&dir.join(MANIFEST_FILE), &self)
    }
}
