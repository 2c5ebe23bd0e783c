//! The run manifest: configuration echo, results, checks and file digests.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::io::{sha256_file, IoError};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the run directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub name: String,
    pub value: f64,
    pub tol: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub wall_time_s: f64,
    pub exit_code: i32,
    pub status: String,
    /// The configuration as emitted TOML.
    pub config: String,
    pub results: serde_json::Value,
    pub checks: Vec<CheckEntry>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: String) -> Self {
        Self {
            artifact: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            wall_time_s: 0.0,
            exit_code: 0,
            status: String::new(),
            config,
            results: serde_json::Value::Null,
            checks: Vec::new(),
            files: Vec::new(),
        }
    }

    /// Records `rel` (relative to `dir`) with its digest.
    pub fn add_file(&mut self, dir: &Path, rel: &str) -> Result<(), IoError> {
        let p = dir.join(rel);
        let bytes = fs::metadata(&p)
            .map_err(|source| IoError::Os { path: p.display().to_string(), source })?
            .len();
        self.files.push(FileEntry {
            path: rel.to_string(),
            sha256: sha256_file(&p)?,
            bytes,
        });
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<(), IoError> {
        let p = dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(self).expect("manifest serialises");
        fs::write(&p, text).map_err(|source| IoError::Os { path: p.display().to_string(), source })
    }

    pub fn read(dir: &Path) -> Result<Self, IoError> {
        let p = dir.join(MANIFEST_NAME);
        let text = fs::read_to_string(&p).map_err(|source| IoError::Os { path: p.display().to_string(), source })?;
        serde_json::from_str(&text).map_err(|e| IoError::Format { path: p.display().to_string(), message: e.to_string() })
    }
}

/// Recomputes every digest listed in `dir/manifest.json`; returns the mismatching paths.
pub fn verify_digests(dir: &Path) -> Result<Vec<String>, IoError> {
    let m = RunManifest::read(dir)?;
    let mut bad = Vec::new();
    for f in &m.files {
        match sha256_file(&dir.join(&f.path)) {
            Ok(d) if d == f.sha256 => {}
            _ => bad.push(f.path.clone()),
        }
    }
    Ok(bad)
}
