//! Run manifest: resolved configuration, stage timings, drift and a checksummed
//! inventory of every artifact.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    pub wall_seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DriftSummary {
    pub max_norm_drift: Option<f64>,
    pub max_relative_energy_drift: Option<f64>,
    pub max_correlator_norm_drift: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub csv_schema_version: u32,
    /// Input echo with every time replaced by the lattice time actually used.
    pub resolved_config: RunConfig,
    pub stages: Vec<StageRecord>,
    pub drift: DriftSummary,
    /// Column names of each CSV artifact.
    pub csv_schemas: BTreeMap<String, Vec<String>>,
    pub files: Vec<FileRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let path = entry.path();
        if entry.file_type()?.is_dir() {
            collect_files(root, &path, out)?;
        } else if path != root.join(MANIFEST_FILE) {
            out.push(path);
        }
    }
    Ok(())
}

fn relative(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

/// Every file under `root` except the manifest, sorted by path.
pub fn inventory(root: &Path) -> Result<Vec<FileRecord>> {
    let mut paths = Vec::new();
    if root.exists() {
        collect_files(root, root, &mut paths)?;
    }
    let mut records = paths
        .iter()
        .map(|p| {
            let bytes = std::fs::read(p)?;
            Ok(FileRecord { path: relative(root, p), bytes: bytes.len() as u64, sha256: sha256_hex(&bytes) })
        })
        .collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(records)
}

/// Header row of every `.csv` in the inventory.
pub fn csv_schemas(root: &Path, files: &[FileRecord]) -> Result<BTreeMap<String, Vec<String>>> {
    let mut out = BTreeMap::new();
    for f in files.iter().filter(|f| f.path.ends_with(".csv")) {
        let text = std::fs::read_to_string(root.join(&f.path))?;
        let header = text.lines().find(|l| !l.trim().is_empty() && !l.starts_with('#')).unwrap_or("");
        out.insert(f.path.clone(), header.split(',').map(|h| h.trim().to_string()).collect());
    }
    Ok(out)
}

impl RunManifest {
    pub fn write(&self, root: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(root)?;
        let path = root.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }

    pub fn read(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST_FILE);
        if !path.exists() {
            return Err(Error::MissingArtifact { path, stage: "run" });
        }
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Re-reads every listed file and compares sizes and checksums.
    pub fn verify(&self, root: &Path) -> Result<()> {
        for f in &self.files {
            let bytes = std::fs::read(root.join(&f.path))?;
            if bytes.len() as u64 != f.bytes || sha256_hex(&bytes) != f.sha256 {
                return Err(Error::Integrity(format!("checksum mismatch for {}", f.path)));
            }
        }
        Ok(())
    }
}
