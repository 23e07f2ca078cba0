//! Run directory bookkeeping: every written file is hashed into
//! `manifest.json` together with per-stage status and timing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::hash::sha256_hex;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUBDIRS: [&str; 4] = ["metrics", "models", "geo", "reports"];

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
    pub elapsed_ms: u64,
    /// Input path → sha256.
    pub inputs: BTreeMap<String, String>,
    /// Run-relative output path → sha256.
    pub outputs: BTreeMap<String, String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub version: String,
    pub workers: usize,
    pub config: BTreeMap<String, String>,
    pub stages: Vec<StageRecord>,
    /// Every file written under the run directory, run-relative path → sha256.
    pub files: BTreeMap<String, String>,
    /// Stages that opened the sealed test labels, in order.
    pub label_access: Vec<String>,
}

impl RunManifest {
    pub fn load(run_dir: &Path) -> Result<Self> {
        let p = run_dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(MANIFEST_FILE, e))
    }

    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn failed_stage(&self) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.status == StageStatus::Failed)
    }
}

/// An open run directory.
pub struct RunDir {
    root: PathBuf,
    pub manifest: RunManifest,
    current: Option<usize>,
}

fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

fn rel_string(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

impl RunDir {
    pub fn create(cfg: &RunConfig, command: &str) -> Result<Self> {
        let root = cfg.run_dir();
        for d in SUBDIRS {
            let p = root.join(d);
            std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        Ok(RunDir {
            root,
            manifest: RunManifest {
                run_id: cfg.run_id(),
                command: command.to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                workers: cfg.workers,
                config: cfg.snapshot(),
                stages: Vec::new(),
                files: BTreeMap::new(),
                label_access: Vec::new(),
            },
            current: None,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn note_output(&mut self, rel: String, hash: String) {
        if let Some(i) = self.current {
            self.manifest.stages[i].outputs.insert(rel.clone(), hash.clone());
        }
        self.manifest.files.insert(rel, hash);
    }

    pub fn write(&mut self, rel: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let p = self.root.join(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&p, bytes.as_ref()).map_err(|e| Error::io(&p, e))?;
        self.note_output(rel.to_string(), sha256_hex(bytes.as_ref()));
        Ok(())
    }

    /// Hashes every file under `rel` (written by a model `save`).
    pub fn register_dir(&mut self, rel: &str) -> Result<()> {
        let mut stack = vec![self.root.join(rel)];
        let mut found = Vec::new();
        while let Some(dir) = stack.pop() {
            for entry in std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
                let p = entry.map_err(|e| Error::io(&dir, e))?.path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    found.push(p);
                }
            }
        }
        found.sort();
        for p in found {
            let rel = rel_string(p.strip_prefix(&self.root).expect("under run root"));
            let hash = file_hash(&p)?;
            self.note_output(rel, hash);
        }
        Ok(())
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let hash = file_hash(path)?;
        if let Some(i) = self.current {
            self.manifest.stages[i].inputs.insert(path.display().to_string(), hash);
        }
        Ok(())
    }

    /// Runs one named stage. A failure is recorded, the manifest is written
    /// with everything produced so far, and the error comes back as
    /// [`Error::Stage`].
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        self.manifest.stages.push(StageRecord {
            name: name.to_string(),
            status: StageStatus::Ok,
            elapsed_ms: 0,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            error: None,
        });
        let idx = self.manifest.stages.len() - 1;
        self.current = Some(idx);
        let start = Instant::now();
        let out = f(self);
        self.current = None;
        let rec = &mut self.manifest.stages[idx];
        rec.elapsed_ms = start.elapsed().as_millis() as u64;
        match out {
            Ok(v) => Ok(v),
            Err(e) => {
                rec.status = StageStatus::Failed;
                rec.error = Some(e.to_string());
                self.save_manifest()?;
                Err(match e {
                    Error::Stage { .. } => e,
                    other => Error::Stage {
                        stage: name.to_string(),
                        message: other.to_string(),
                    },
                })
            }
        }
    }

    pub fn save_manifest(&self) -> Result<()> {
        let p = self.root.join(MANIFEST_FILE);
        let body = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes") + "\n";
        std::fs::write(&p, body).map_err(|e| Error::io(&p, e))
    }

    pub fn finish(self) -> Result<RunManifest> {
        self.save_manifest()?;
        Ok(self.manifest)
    }
}

/// Re-hashes every file the manifest lists; returns the paths that are
/// missing or whose content changed.
pub fn audit(run_dir: &Path) -> Result<Vec<String>> {
    let m = RunManifest::load(run_dir)?;
    let mut bad = Vec::new();
    for (rel, hash) in &m.files {
        match file_hash(&run_dir.join(rel)) {
            Ok(h) if &h == hash => {}
            _ => bad.push(rel.clone()),
        }
    }
    Ok(bad)
}
