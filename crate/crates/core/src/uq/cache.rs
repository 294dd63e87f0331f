//! Collocation cache keyed by canonical node keys.
//!
//! Values are only reusable for one solver fidelity (mesh, time step, model),
//! so every cache carries a fingerprint of that fidelity and is persisted to a
//! file whose name is derived from it.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::{UqError, Result};
use crate::sparse_grid::NodeKey;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CachedSolve {
    pub qoi_raw: f64,
    pub iterations: usize,
    pub seconds: f64,
}

/// FNV-1a; stable across platforms and compiler versions.
pub fn fingerprint_hash(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[derive(Debug)]
pub struct CollocationCache {
    fingerprint: String,
    entries: Mutex<BTreeMap<NodeKey, CachedSolve>>,
    file: Option<PathBuf>,
    dim: usize,
}

pub(crate) const CACHE_HEADER_TAIL: &str = "qoi_raw,qoi_norm,iters,seconds";

impl CollocationCache {
    /// In-memory cache for nodes of dimension `dim`.
    pub fn in_memory(fingerprint: impl Into<String>, dim: usize) -> Self {
        Self {
            fingerprint: fingerprint.into(),
            entries: Mutex::new(BTreeMap::new()),
            file: None,
            dim,
        }
    }

    /// Cache backed by `dir/collocation-<hash>.csv`, loading any existing
    /// records.
    pub fn persistent(dir: &Path, fingerprint: impl Into<String>, dim: usize) -> Result<Self> {
        let fingerprint = fingerprint.into();
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("collocation-{:016x}.csv", fingerprint_hash(&fingerprint)));
        let mut entries = BTreeMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for (lineno, line) in reader.lines().enumerate() {
                let line = line?;
                if lineno == 0 || line.trim().is_empty() {
                    continue;
                }
                let (key, solve) = parse_record(&line, dim)
                    .map_err(|e| UqError::Cache(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
                entries.insert(key, solve);
            }
        } else {
            let mut f = File::create(&path)?;
            let mut header = String::from("node_key");
            for n in 1..=dim {
                header.push_str(&format!(",y_{n}"));
            }
            writeln!(f, "{header},{CACHE_HEADER_TAIL}")?;
        }
        Ok(Self {
            fingerprint,
            entries: Mutex::new(entries),
            file: Some(path),
            dim,
        })
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn path(&self) -> Option<&Path> {
        self.file.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &NodeKey) -> Option<CachedSolve> {
        self.entries.lock().unwrap().get(key).copied()
    }

    /// Inserts new records (in the given order) and appends them to the
    /// backing file. Existing keys are left untouched.
    pub fn insert_all(&self, records: &[(NodeKey, CachedSolve)], reference: f64) -> Result<()> {
        let mut entries = self.entries.lock().unwrap();
        let mut out = String::new();
        for (key, solve) in records {
            if entries.contains_key(key) {
                continue;
            }
            entries.insert(key.clone(), *solve);
            if self.file.is_some() {
                out.push_str(&key.to_string());
                for y in key.point() {
                    out.push_str(&format!(",{y:.16e}"));
                }
                out.push_str(&format!(
                    ",{:.16e},{:.16e},{},{:.6e}\n",
                    solve.qoi_raw,
                    solve.qoi_raw / reference,
                    solve.iterations,
                    solve.seconds
                ));
            }
        }
        if let Some(path) = &self.file {
            if !out.is_empty() {
                let mut f = OpenOptions::new().append(true).open(path)?;
                f.write_all(out.as_bytes())?;
            }
        }
        Ok(())
    }
}

fn parse_record(line: &str, dim: usize) -> std::result::Result<(NodeKey, CachedSolve), String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != dim + 5 {
        return Err(format!("expected {} fields, found {}", dim + 5, fields.len()));
    }
    let key: NodeKey = fields[0].parse()?;
    if key.dim() != dim {
        return Err(format!("key has dimension {}, cache expects {dim}", key.dim()));
    }
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("`{s}`: {e}"));
    let qoi_raw = num(fields[dim + 1])?;
    let iterations = fields[dim + 3].trim().parse::<usize>().map_err(|e| e.to_string())?;
    let seconds = num(fields[dim + 4])?;
    Ok((
        key,
        CachedSolve {
            qoi_raw,
            iterations,
            seconds,
        },
    ))
}
