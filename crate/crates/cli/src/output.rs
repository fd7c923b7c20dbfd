//! Output files and the manifest written beside them.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hyperpam::ledger::ConstantLedger;

use crate::config::Config;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub subcommand: String,
    pub format: Format,
    pub master_seed: u64,
    pub config_echo: Config,
    pub constant_ledger: ConstantLedger,
    pub outputs: Vec<OutputDigest>,
    pub wall_time_seconds: f64,
}

pub const MANIFEST: &str = "manifest.json";

/// Collects output files of one run.
pub struct Run {
    dir: PathBuf,
    files: Vec<String>,
    started: Instant,
    pub format: Format,
}

impl Run {
    pub fn new(dir: &Path, format: Format) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            started: Instant::now(),
            format,
        })
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    /// Writes `stem.csv` or `stem.jsonl` per the run format.
    pub fn write_records<T: Serialize>(&mut self, stem: &str, records: &[T]) -> Result<()> {
        match self.format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                for r in records {
                    w.serialize(r)?;
                }
                let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
                self.write_bytes(&format!("{stem}.csv"), &bytes)
            }
            Format::Jsonl => {
                let mut out = Vec::new();
                for r in records {
                    serde_json::to_writer(&mut out, r)?;
                    out.push(b'\n');
                }
                self.write_bytes(&format!("{stem}.jsonl"), &out)
            }
        }
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    pub fn finish(self, subcommand: &str, config: &Config, ledger: &ConstantLedger) -> Result<Manifest> {
        let mut outputs = Vec::new();
        for name in &self.files {
            let bytes = fs::read(self.dir.join(name))?;
            outputs.push(OutputDigest {
                path: name.clone(),
                sha256: hex::encode(Sha256::digest(&bytes)),
            });
        }
        let manifest = Manifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            format: self.format,
            master_seed: config.mc.seed,
            config_echo: config.clone(),
            constant_ledger: ledger.clone(),
            outputs,
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        fs::write(self.dir.join(MANIFEST), bytes)?;
        Ok(manifest)
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
}

/// Recomputes every digest listed in the manifest at `dir`.
pub fn verify_digests(dir: &Path, manifest: &Manifest) -> Result<Vec<(String, bool)>> {
    manifest
        .outputs
        .iter()
        .map(|o| {
            let bytes = fs::read(dir.join(&o.path))?;
            Ok((o.path.clone(), hex::encode(Sha256::digest(&bytes)) == o.sha256))
        })
        .collect()
}
