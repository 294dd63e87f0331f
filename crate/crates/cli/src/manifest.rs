use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub kind: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyStatus {
    pub name: String,
    pub status: &'static str,
    pub detail: Option<String>,
}

/// Record of one CLI invocation: what was run, with which configuration,
/// and which files it produced.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// FNV-1a of the canonical configuration text.
    pub config_hash: String,
    pub artifact_version: &'static str,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<Artifact>,
    pub studies: Vec<StudyStatus>,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn start(command: &str, canonical_config: &str) -> Self {
        Self {
            command: command.to_string(),
            config_hash: format!("{:016x}", sgcoll::uq::fingerprint_hash(canonical_config)),
            artifact_version: env!("CARGO_PKG_VERSION"),
            started_unix: now(),
            finished_unix: 0,
            outputs: Vec::new(),
            studies: Vec::new(),
        }
    }

    /// Writes `contents` to `dir/name` and records it.
    pub fn emit(&mut self, dir: &Path, name: &str, kind: &'static str, contents: &str) -> Result<PathBuf, CliError> {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.outputs.retain(|a| a.path != path);
        self.outputs.push(Artifact {
            path: path.clone(),
            kind,
        });
        Ok(path)
    }

    pub fn study(&mut self, name: impl Into<String>, status: &'static str, detail: Option<String>) {
        self.studies.push(StudyStatus {
            name: name.into(),
            status,
            detail,
        });
    }

    pub fn finish(mut self, dir: &Path) -> Result<PathBuf, CliError> {
        self.finished_unix = now();
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self).expect("manifest is serializable");
        std::fs::write(&path, text + "\n").map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }
}
