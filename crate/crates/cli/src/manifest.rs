//! Reproducibility record written next to every output artifact as
//! `<artifact>.manifest.json`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub command_line: Vec<String>,
    pub config: serde_json::Value,
    /// sha256 of the compact JSON form of `config`.
    pub config_hash: String,
    pub inputs: Vec<InputDigest>,
    pub seed: Option<u64>,
    pub n_workers: Option<usize>,
    pub artifacts: Vec<String>,
    pub created_unix_ms: u64,
    #[serde(default)]
    pub timings: BTreeMap<String, f64>,
}

pub fn sidecar_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.as_os_str().to_os_string();
    name.push(".manifest.json");
    PathBuf::from(name)
}

pub fn digest_file(path: &Path) -> CliResult<InputDigest> {
    let mut hasher = Sha256::new();
    let file = File::open(path).map_err(CliError::io(path))?;
    let bytes = io::copy(&mut BufReader::with_capacity(1 << 20, file), &mut hasher).map_err(CliError::io(path))?;
    Ok(InputDigest {
        path: path.display().to_string(),
        bytes,
        sha256: hex::encode(hasher.finalize()),
    })
}

impl RunManifest {
    pub fn new<C: Serialize>(
        command: &str,
        config: &C,
        seed: Option<u64>,
        n_workers: Option<usize>,
    ) -> CliResult<Self> {
        let config = serde_json::to_value(config)?;
        let config_hash = hex::encode(Sha256::digest(serde_json::to_vec(&config)?));
        let created_unix_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64);
        Ok(RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            command_line: std::env::args().collect(),
            config,
            config_hash,
            inputs: Vec::new(),
            seed,
            n_workers,
            artifacts: Vec::new(),
            created_unix_ms,
            timings: BTreeMap::new(),
        })
    }

    pub fn add_inputs<'a>(&mut self, paths: impl IntoIterator<Item = &'a Path>) -> CliResult<()> {
        for p in paths {
            self.inputs.push(digest_file(p)?);
        }
        Ok(())
    }

    pub fn time(&mut self, name: &str, seconds: f64) {
        self.timings.insert(name.to_string(), seconds);
    }

    /// Records `artifacts` and writes one sidecar per artifact.
    pub fn write(&mut self, artifacts: &[PathBuf]) -> CliResult<()> {
        self.artifacts = artifacts.iter().map(|p| p.display().to_string()).collect();
        let mut json = serde_json::to_vec_pretty(self)?;
        json.push(b'\n');
        for a in artifacts {
            let path = sidecar_path(a);
            std::fs::write(&path, &json).map_err(CliError::io(&path))?;
        }
        Ok(())
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let file = File::open(path).map_err(CliError::io(path))?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_appends_suffix() {
        assert_eq!(
            sidecar_path(Path::new("out/model.json")),
            PathBuf::from("out/model.json.manifest.json")
        );
    }

    #[test]
    fn config_hash_depends_only_on_config() {
        let a = RunManifest::new("train", &serde_json::json!({"x": 1}), Some(1), Some(1)).unwrap();
        let b = RunManifest::new("train", &serde_json::json!({"x": 1}), Some(2), Some(8)).unwrap();
        let c = RunManifest::new("train", &serde_json::json!({"x": 2}), Some(1), Some(1)).unwrap();
        assert_eq!(a.config_hash, b.config_hash);
        assert_ne!(a.config_hash, c.config_hash);
        assert_eq!(a.config_hash.len(), 64);
    }

    #[test]
    fn digest_of_known_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc");
        std::fs::write(&p, b"abc").unwrap();
        let d = digest_file(&p).unwrap();
        assert_eq!(d.bytes, 3);
        assert_eq!(
            d.sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
