//! Output directory handling: an exclusive lock file and the run manifest
//! of output hashes.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{hex, PipelineConfig};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "run_manifest.toml";
pub const LOCK_FILE: &str = ".lock";

/// Held while a command writes into an output directory; removed on drop.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::invalid(format!(
                "{} is locked by another run (remove {} if stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    /// Output path (relative to the output directory when inside it) → SHA-256.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub runs: BTreeMap<String, ManifestEntry>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex(&Sha256::digest(std::fs::read(path)?)))
}

/// A locked output directory.
#[derive(Debug)]
pub struct RunDir {
    pub root: PathBuf,
    _lock: RunLock,
}

impl RunDir {
    pub fn open(root: &Path) -> Result<Self> {
        let lock = RunLock::acquire(root)?;
        Ok(Self { root: root.to_path_buf(), _lock: lock })
    }

    /// `<root>/<sub>/<name>`, creating `<sub>`.
    pub fn file(&self, sub: &str, name: &str) -> Result<PathBuf> {
        let dir = self.root.join(sub);
        std::fs::create_dir_all(&dir)?;
        Ok(dir.join(name))
    }

    pub fn manifest(&self) -> Result<RunManifest> {
        let path = self.root.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(RunManifest::default());
        }
        toml::from_str(&std::fs::read_to_string(&path)?).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    /// Record (or replace) the entry `key` with hashes of `outputs`.
    pub fn record(&self, key: &str, command: &str, cfg: &PipelineConfig, outputs: &[PathBuf]) -> Result<()> {
        let mut m = self.manifest()?;
        let mut hashes = BTreeMap::new();
        for p in outputs {
            let name = p.strip_prefix(&self.root).unwrap_or(p).to_string_lossy().replace('\\', "/");
            hashes.insert(name, sha256_file(p)?);
        }
        m.runs.insert(
            key.to_string(),
            ManifestEntry { command: command.to_string(), config_sha256: cfg.sha256()?, seed: cfg.seed, outputs: hashes },
        );
        let text = toml::to_string(&m).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(self.root.join(MANIFEST_FILE), text)?;
        Ok(())
    }
}
