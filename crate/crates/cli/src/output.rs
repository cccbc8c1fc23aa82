use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// Files produced by one command, held in memory until the command has
/// succeeded so a failure leaves nothing behind.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
    inputs: Vec<InputRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputRecord {
    pub role: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub command: &'a str,
    pub seed: u64,
    pub config_sha256: String,
    /// Effective configuration without `paths`.
    pub config: serde_json::Value,
    pub versions: Versions,
    pub inputs: &'a [InputRecord],
    pub outputs: Vec<OutputRecord>,
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub seqids: &'static str,
    pub cli: &'static str,
    pub model_format: u32,
    pub dataset_format: u32,
}

impl Versions {
    pub fn current() -> Versions {
        Versions {
            seqids: seqids::VERSION,
            cli: env!("CARGO_PKG_VERSION"),
            model_format: seqids::classifier::MODEL_VERSION,
            dataset_format: seqids::flowdata::DATASET_FORMAT_VERSION,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    /// Adds the output of a writer-based exporter.
    pub fn add_with<F>(&mut self, name: impl Into<String>, write: F) -> anyhow::Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> seqids::Result<()>,
    {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.add(name, buf);
        Ok(())
    }

    pub fn add_json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) -> anyhow::Result<()> {
        let mut buf = serde_json::to_vec_pretty(value)?;
        buf.push(b'\n');
        self.add(name, buf);
        Ok(())
    }

    pub fn input(&mut self, role: &str, bytes: &[u8]) {
        self.inputs.push(InputRecord {
            role: role.to_string(),
            sha256: sha256_hex(bytes),
        });
    }

    /// Writes every file and `manifest_<command>.json` under `dir`.
    pub fn commit(self, dir: &Path, command: &str, config: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut written = Vec::new();
        let mut outputs = Vec::new();
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
            outputs.push(OutputRecord {
                file: name.clone(),
                bytes: bytes.len(),
                sha256: sha256_hex(bytes),
            });
            written.push(path);
        }
        let manifest = Manifest {
            command,
            seed: config.seed,
            config_sha256: config.hash(),
            config: config.hashed_value(),
            versions: Versions::current(),
            inputs: &self.inputs,
            outputs,
        };
        let path = dir.join(format!("manifest_{}.json", command.replace('-', "_")));
        let mut buf = serde_json::to_vec_pretty(&manifest)?;
        buf.push(b'\n');
        fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
        Ok(written)
    }
}
