use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const LOCK_NAME: &str = ".lock";

/// A file written by a stage, relative to the workdir.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub sha256: String,
}

/// An upstream stage manifest as it was when this stage ran.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRef {
    pub stage: String,
    pub manifest_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub stage: String,
    pub config_hash: String,
    pub seed: u64,
    pub inputs: Vec<InputRef>,
    pub outputs: Vec<Artifact>,
    /// Unix seconds.
    pub started: u64,
    pub finished: u64,
}

pub fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn stage_dir(workdir: &Path, stage: &str) -> PathBuf {
    workdir.join(stage)
}

pub fn manifest_path(workdir: &Path, stage: &str) -> PathBuf {
    stage_dir(workdir, stage).join(MANIFEST_NAME)
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(dir, e))?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            walk(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

/// Every file under the stage directory except the manifest itself, sorted.
pub fn collect_outputs(workdir: &Path, stage: &str) -> Result<Vec<Artifact>> {
    let mut files = Vec::new();
    walk(&stage_dir(workdir, stage), &mut files)?;
    files
        .into_iter()
        .filter(|p| p.file_name().is_none_or(|n| n != MANIFEST_NAME))
        .map(|p| {
            Ok(Artifact {
                sha256: sha256_file(&p)?,
                path: p.strip_prefix(workdir).unwrap_or(&p).to_path_buf(),
            })
        })
        .collect()
}

pub fn write_manifest(workdir: &Path, manifest: &RunManifest) -> Result<()> {
    let path = manifest_path(workdir, &manifest.stage);
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&path, json).map_err(|e| Error::io(&path, e))
}

fn missing(stage: &str, detail: impl Into<String>) -> Error {
    Error::MissingInput {
        stage: stage.into(),
        detail: detail.into(),
    }
}

pub fn read_manifest(workdir: &Path, stage: &str) -> Result<RunManifest> {
    let path = manifest_path(workdir, stage);
    let text = fs::read_to_string(&path)
        .map_err(|_| missing(stage, format!("no manifest at {}; run `{stage}` first", path.display())))?;
    serde_json::from_str(&text).map_err(|e| missing(stage, format!("unreadable manifest {}: {e}", path.display())))
}

/// Checks that the stage's outputs are on disk with their recorded hashes
/// and that every upstream manifest is unchanged and itself valid.
pub fn validate_closure(workdir: &Path, stage: &str) -> Result<RunManifest> {
    let m = read_manifest(workdir, stage)?;
    for a in &m.outputs {
        let p = workdir.join(&a.path);
        if !p.exists() {
            return Err(missing(stage, format!("artifact {} is gone", a.path.display())));
        }
        if sha256_file(&p)? != a.sha256 {
            return Err(missing(stage, format!("artifact {} was modified", a.path.display())));
        }
    }
    for input in &m.inputs {
        validate_closure(workdir, &input.stage)?;
        let current = sha256_file(&manifest_path(workdir, &input.stage))?;
        if current != input.manifest_sha256 {
            return Err(missing(
                &input.stage,
                format!("rerun since `{stage}` consumed it; rerun `{stage}`"),
            ));
        }
    }
    Ok(m)
}

pub fn input_ref(workdir: &Path, stage: &str) -> Result<InputRef> {
    Ok(InputRef {
        stage: stage.into(),
        manifest_sha256: sha256_file(&manifest_path(workdir, stage))?,
    })
}

/// Exclusive claim on a workdir, released on drop.
#[derive(Debug)]
pub struct WorkdirLock {
    path: PathBuf,
}

impl WorkdirLock {
    pub fn acquire(workdir: &Path) -> Result<Self> {
        fs::create_dir_all(workdir).map_err(|e| Error::io(workdir, e))?;
        let path = workdir.join(LOCK_NAME);
        fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| {
                if e.kind() == std::io::ErrorKind::AlreadyExists {
                    Error::InvalidArgument(format!(
                        "workdir is locked by another run; remove {} if it is stale",
                        path.display()
                    ))
                } else {
                    Error::io(&path, e)
                }
            })?;
        Ok(Self { path })
    }
}

impl Drop for WorkdirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
