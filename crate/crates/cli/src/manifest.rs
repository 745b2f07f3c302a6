use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub file: String,
    pub sha256: String,
}

/// Record of one command run. Everything except `timings_ms` is a pure
/// function of the flags and inputs; `run_id` digests those fields.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub run_id: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub artifacts: Vec<Artifact>,
    pub timings_ms: BTreeMap<String, f64>,
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Collects inputs, outputs and stage timings while a command runs.
pub struct Recorder {
    command: &'static str,
    seed: u64,
    config: serde_json::Value,
    inputs: Vec<InputDigest>,
    artifacts: Vec<Artifact>,
    timings: BTreeMap<String, f64>,
}

impl Recorder {
    pub fn new(command: &'static str, seed: u64, config: impl Serialize) -> Self {
        Recorder {
            command,
            seed,
            config: serde_json::to_value(config).expect("config serializes"),
            inputs: Vec::new(),
            artifacts: Vec::new(),
            timings: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(InputDigest {
            file: file_name(path),
            sha256: sha256_hex(bytes),
        });
    }

    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings
            .insert(stage.to_string(), start.elapsed().as_secs_f64() * 1e3);
        out
    }

    /// Deterministic identifier of this run's configuration and inputs.
    pub fn run_id(&self) -> String {
        let key = serde_json::json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": self.seed,
            "config": self.config,
            "inputs": self.inputs,
        });
        sha256_hex(key.to_string().as_bytes())
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> std::io::Result<()> {
        fs::write(path, bytes)?;
        self.artifacts.push(Artifact {
            file: file_name(path),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn finish(self, path: &Path) -> std::io::Result<PathBuf> {
        let manifest = RunManifest {
            tool: "tabdx",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            run_id: self.run_id(),
            seed: self.seed,
            config: self.config,
            inputs: self.inputs,
            artifacts: self.artifacts,
            timings_ms: self.timings,
        };
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(path, json + "\n")?;
        Ok(path.to_path_buf())
    }
}
