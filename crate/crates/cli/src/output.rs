use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

pub const MANIFEST_NAME: &str = "manifest.json";

/// Output directory built in a sibling staging directory and renamed into
/// place on success, so a failed run leaves nothing at the target path.
pub struct Staged {
    target: PathBuf,
    staging: PathBuf,
    files: Vec<PathBuf>,
}

impl Staged {
    pub fn new(target: &Path) -> Result<Self, Failure> {
        if target.exists() {
            let empty = target.is_dir() && fs::read_dir(target).map_err(|e| Failure::io(target, e))?.next().is_none();
            if !empty {
                return Err(Failure::Config(format!(
                    "output directory {} already exists and is not empty",
                    target.display()
                )));
            }
        }
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).map_err(|e| Failure::io(&parent, e))?;
        let name = target
            .file_name()
            .ok_or_else(|| Failure::Config(format!("invalid output path {}", target.display())))?
            .to_string_lossy()
            .into_owned();
        let staging = parent.join(format!(".{name}.partial-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| Failure::io(&staging, e))?;
        }
        fs::create_dir_all(&staging).map_err(|e| Failure::io(&staging, e))?;
        Ok(Self { target: target.to_path_buf(), staging, files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.staging
    }

    /// Creates `rel`'s parent directories and returns its staging path.
    pub fn path(&self, rel: &str) -> Result<PathBuf, Failure> {
        let p = self.staging.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| Failure::io(parent, e))?;
        }
        Ok(p)
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), Failure> {
        let p = self.path(rel)?;
        fs::write(&p, bytes).map_err(|e| Failure::io(&p, e))?;
        self.files.push(PathBuf::from(rel));
        Ok(())
    }

    pub fn write_json(&mut self, rel: &str, value: &impl Serialize) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Numerical(e.to_string()))?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    /// Records a file written directly into the staging directory.
    pub fn register(&mut self, rel: impl Into<PathBuf>) {
        self.files.push(rel.into());
    }

    /// Hashes every registered file, writes the manifest and moves the
    /// directory into place.
    pub fn commit(self, mut manifest: RunManifest) -> Result<PathBuf, Failure> {
        let mut files = Vec::with_capacity(self.files.len());
        for rel in &self.files {
            let p = self.staging.join(rel);
            let bytes = fs::read(&p).map_err(|e| Failure::io(&p, e))?;
            files.push(FileEntry {
                path: rel.to_string_lossy().replace('\\', "/"),
                bytes: bytes.len() as u64,
                sha256: hex::encode(Sha256::digest(&bytes)),
            });
        }
        files.sort_by(|a, b| a.path.cmp(&b.path));
        manifest.files = files;
        manifest.finished_unix_ms = now_ms();
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Numerical(e.to_string()))?;
        text.push('\n');
        let mp = self.staging.join(MANIFEST_NAME);
        fs::write(&mp, text).map_err(|e| Failure::io(&mp, e))?;
        if self.target.exists() {
            fs::remove_dir(&self.target).map_err(|e| Failure::io(&self.target, e))?;
        }
        fs::rename(&self.staging, &self.target).map_err(|e| Failure::io(&self.target, e))?;
        Ok(self.target.clone())
    }
}

impl Drop for Staged {
    fn drop(&mut self) {
        if self.staging.exists() {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Provenance record written as `manifest.json` next to the artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub config_name: String,
    /// SHA-256 of the canonical configuration JSON.
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub module_versions: BTreeMap<String, String>,
    pub warnings: Vec<String>,
    /// Per-seed or per-point failures that did not abort the run.
    pub failures: Vec<String>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn new(command: &str, config_name: &str, config_hash: String) -> Self {
        let mut module_versions = BTreeMap::new();
        module_versions.insert("splitband".to_string(), splitband::VERSION.to_string());
        module_versions.insert("trajectory_format".to_string(), splitband::trajectory_io::FORMAT_VERSION.to_string());
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_name: config_name.to_string(),
            config_hash,
            seeds: Vec::new(),
            started_unix_ms: now_ms(),
            finished_unix_ms: 0,
            module_versions,
            warnings: Vec::new(),
            failures: Vec::new(),
            files: Vec::new(),
        }
    }
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}
