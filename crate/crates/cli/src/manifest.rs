use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliResult;
use crate::io::write_json;

/// Provenance record written next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the canonical JSON form of the effective configuration.
    pub config_hash: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub input_paths: Vec<String>,
    pub output_paths: Vec<String>,
    pub versions: String,
    pub wall_time_ms: u64,
}

/// Hex SHA-256 of `config` serialized with sorted object keys.
pub fn config_hash(config: &serde_json::Value) -> String {
    let canonical = serde_json::to_string(config).expect("JSON values always serialize");
    format!("{:x}", Sha256::digest(canonical.as_bytes()))
}

pub fn versions() -> String {
    format!(
        "rebias {} (rebias-core {})",
        env!("CARGO_PKG_VERSION"),
        rebias_core::VERSION
    )
}

/// Collects outputs while a command runs and writes `manifest.json`.
pub struct Recorder {
    command: &'static str,
    started: Instant,
    config: serde_json::Value,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Recorder {
    pub fn new<C: Serialize>(command: &'static str, config: &C, inputs: &[&Path]) -> Self {
        // serde_json's map is key-ordered, so the value is canonical
        let config = serde_json::to_value(config).expect("configs serialize to JSON");
        Self {
            command,
            started: Instant::now(),
            config,
            seed: None,
            inputs: inputs.iter().map(|p| p.to_path_buf()).collect(),
            outputs: Vec::new(),
        }
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    /// Registers an output and returns its path.
    pub fn output(&mut self, path: PathBuf) -> PathBuf {
        self.outputs.push(path.clone());
        path
    }

    pub fn finish(self, dir: &Path) -> CliResult<RunManifest> {
        let display = |ps: &[PathBuf]| ps.iter().map(|p| p.display().to_string()).collect();
        let manifest = RunManifest {
            command: self.command.to_string(),
            config_hash: config_hash(&self.config),
            config: self.config,
            seed: self.seed,
            input_paths: display(&self.inputs),
            output_paths: display(&self.outputs),
            versions: versions(),
            wall_time_ms: self.started.elapsed().as_millis() as u64,
        };
        write_json(&dir.join("manifest.json"), &manifest)?;
        Ok(manifest)
    }
}
