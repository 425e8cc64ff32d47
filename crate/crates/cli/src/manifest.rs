//! Per-stage run manifests recording what produced each artifact.

use std::fs::{self, File};
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Manifest fields that legitimately differ between identical runs.
pub const VOLATILE_FIELDS: [&str; 2] = ["started_at", "wall_time_secs"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stage: String,
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub inputs: Vec<FileDigest>,
    /// Paths inside the work directory are recorded relative to it.
    pub outputs: Vec<FileDigest>,
    pub started_at: String,
    pub wall_time_secs: f64,
    /// Stage-specific summary numbers.
    pub summary: serde_json::Value,
}

pub fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let mut file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut bytes = 0u64;
    loop {
        let n = match file.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e).with_context(|| format!("reading {}", path.display())),
        };
        hasher.update(&buf[..n]);
        bytes += n as u64;
    }
    Ok((hex::encode(hasher.finalize()), bytes))
}

/// Collects inputs and outputs while a stage runs, then writes
/// `<workdir>/<stage>.manifest.json`.
pub struct ManifestBuilder {
    stage: String,
    config_hash: String,
    workdir: PathBuf,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    started: Instant,
    started_at: String,
}

impl ManifestBuilder {
    pub fn start(stage: &str, config_hash: &str, workdir: &Path) -> Self {
        Self {
            stage: stage.to_string(),
            config_hash: config_hash.to_string(),
            workdir: workdir.to_path_buf(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
            started_at: chrono::Utc::now().to_rfc3339(),
        }
    }

    pub fn input(&mut self, path: &Path) -> &mut Self {
        self.inputs.push(path.to_path_buf());
        self
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.outputs.push(path.to_path_buf());
        self
    }

    pub fn finish(self, summary: serde_json::Value) -> Result<RunManifest> {
        let digest = |p: &Path, shown: String| -> Result<FileDigest> {
            let (sha256, bytes) = sha256_file(p)?;
            Ok(FileDigest {
                path: shown,
                sha256,
                bytes,
            })
        };
        let shown = |p: &Path| {
            p.strip_prefix(&self.workdir)
                .unwrap_or(p)
                .display()
                .to_string()
        };
        let inputs = self
            .inputs
            .iter()
            .map(|p| digest(p, shown(p)))
            .collect::<Result<_>>()?;
        let outputs = self
            .outputs
            .iter()
            .map(|p| digest(p, shown(p)))
            .collect::<Result<_>>()?;
        let manifest = RunManifest {
            stage: self.stage.clone(),
            tool: "crft".into(),
            version: TOOL_VERSION.into(),
            config_hash: self.config_hash,
            inputs,
            outputs,
            started_at: self.started_at,
            wall_time_secs: self.started.elapsed().as_secs_f64(),
            summary,
        };
        let path = manifest_path(&self.workdir, &self.stage);
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(manifest)
    }
}

pub fn manifest_path(workdir: &Path, stage: &str) -> PathBuf {
    workdir.join(format!("{stage}.manifest.json"))
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
