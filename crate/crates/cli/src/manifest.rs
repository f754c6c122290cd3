//! Run manifest and artifact writing.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn unix_millis() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

/// One output file, built in memory before anything is written.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn json<T: Serialize>(name: &str, value: &T) -> Result<Self> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        Ok(Self { name: name.into(), bytes })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub value: String,
    pub passed: bool,
}

/// Everything needed to reproduce and audit one subcommand run. Only
/// `started_unix_ms`, `finished_unix_ms` and `threads` vary between
/// otherwise identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config_path: String,
    pub config_sha256: String,
    /// Hash of the configuration after command-line overrides, without the
    /// output directory.
    pub effective_config_sha256: String,
    pub seed: u64,
    pub replicas: u32,
    /// Replica `r` draws from Philox4x32-10 keyed by `(seed, r)`.
    pub seed_provenance: String,
    pub threads: Option<usize>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub outputs: Vec<OutputEntry>,
    pub checks: Vec<CheckRecord>,
    pub passed: bool,
    /// Set when the pipeline failed before all outputs were written.
    pub partial: bool,
    pub error: Option<String>,
}

pub fn manifest_name(subcommand: &str) -> String {
    format!("manifest.{subcommand}.json")
}

/// Write the artifacts in order, then the manifest.
pub fn write_outputs(dir: &Path, artifacts: &[Artifact], manifest: &mut RunManifest) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    for a in artifacts {
        let path = dir.join(&a.name);
        std::fs::write(&path, &a.bytes).with_context(|| format!("cannot write {}", path.display()))?;
        manifest.outputs.push(OutputEntry {
            file: a.name.clone(),
            bytes: a.bytes.len(),
            sha256: sha256_hex(&a.bytes),
        });
    }
    manifest.finished_unix_ms = unix_millis();
    let m = Artifact::json(&manifest_name(&manifest.subcommand), manifest)?;
    std::fs::write(dir.join(&m.name), &m.bytes)
        .with_context(|| format!("cannot write manifest in {}", dir.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn json_artifacts_end_with_newline() {
        let a = Artifact::json("x.json", &serde_json::json!({"k": 1.5})).unwrap();
        assert_eq!(a.bytes.last(), Some(&b'\n'));
    }
}
