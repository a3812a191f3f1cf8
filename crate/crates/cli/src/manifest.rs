use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Record of one subcommand invocation, written next to its artifacts.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    /// Input path → sha256.
    pub inputs: BTreeMap<String, String>,
    /// Artifact path relative to the output directory → sha256.
    pub artifacts: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Collects what a subcommand read and wrote.
#[derive(Debug)]
pub struct Outputs {
    pub dir: PathBuf,
    pub seeds: BTreeMap<String, u64>,
    inputs: Vec<PathBuf>,
    artifacts: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            artifacts: Vec::new(),
        })
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.to_owned(), value);
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    /// Path of an artifact in the output directory; it is hashed when the
    /// manifest is written.
    pub fn artifact(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_owned());
        self.dir.join(name)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.artifact(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn finish(self, subcommand: &'static str, config: serde_json::Value) -> Result<PathBuf> {
        let mut inputs = BTreeMap::new();
        for p in &self.inputs {
            inputs.insert(p.display().to_string(), sha256_file(p)?);
        }
        let mut artifacts = BTreeMap::new();
        for a in &self.artifacts {
            artifacts.insert(a.clone(), sha256_file(&self.dir.join(a))?);
        }
        let manifest = Manifest {
            tool: "fseval",
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            config,
            seeds: self.seeds,
            inputs,
            artifacts,
        };
        let path = self.dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
