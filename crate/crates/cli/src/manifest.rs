use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Collects the inputs read and outputs written by one command.
pub struct Outputs {
    dir: PathBuf,
    inputs: Vec<PathBuf>,
    written: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            inputs: Vec::new(),
            written: Vec::new(),
        }
    }

    /// Path of output `name`, recorded for the manifest.
    pub fn file(&mut self, name: &str) -> PathBuf {
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        self.dir.join(name)
    }

    pub fn input(&mut self, path: &Path) {
        if !self.inputs.iter().any(|p| p == path) {
            self.inputs.push(path.to_path_buf());
        }
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.file(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.file(name);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}

/// Everything needed to reproduce a run. Holds no timestamps or absolute
/// output paths, so identical runs produce identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, out: &Outputs) -> Result<Self> {
        let inputs = out
            .inputs
            .iter()
            .map(|p| {
                Ok(FileDigest {
                    path: p.display().to_string(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut outputs = out
            .written
            .iter()
            .map(|name| {
                Ok(FileDigest {
                    path: name.clone(),
                    sha256: sha256_file(&out.dir.join(name))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        outputs.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed: config.get("seed").and_then(|s| s.as_u64()),
            config,
            inputs,
            outputs,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        let path = dir.join(MANIFEST_NAME);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    /// Fails if any recorded input changed since the run.
    pub fn check_inputs(&self) -> Result<()> {
        for f in &self.inputs {
            let now = sha256_file(Path::new(&f.path))?;
            if now != f.sha256 {
                bail!("input {} changed since the recorded run", f.path);
            }
        }
        if self.version != env!("CARGO_PKG_VERSION") {
            log::warn!(
                "manifest written by version {}, replaying with {}",
                self.version,
                env!("CARGO_PKG_VERSION")
            );
        }
        Ok(())
    }

    pub fn output_differences(&self, other: &RunManifest) -> Vec<String> {
        let mut diffs = Vec::new();
        for f in &self.outputs {
            match other.outputs.iter().find(|o| o.path == f.path) {
                Some(o) if o.sha256 == f.sha256 => {}
                _ => diffs.push(f.path.clone()),
            }
        }
        for o in &other.outputs {
            if !self.outputs.iter().any(|f| f.path == o.path) {
                diffs.push(o.path.clone());
            }
        }
        diffs
    }
}
