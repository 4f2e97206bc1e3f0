use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Record of one command run: resolved settings plus content hashes of
/// everything read and written. Hashes are keyed by file name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: serde_json::Value,
    pub input_hashes: BTreeMap<String, String>,
    pub output_hashes: BTreeMap<String, String>,
    pub seed: u64,
    pub duration_ms: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io("read", path, e))?;
    Ok(sha256_hex(&bytes))
}

fn key(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

pub struct RunRecorder {
    command: String,
    config: serde_json::Value,
    seed: u64,
    start: Instant,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    extra_outputs: BTreeMap<String, String>,
}

impl RunRecorder {
    pub fn start(command: &str, config: &impl Serialize, seed: u64) -> Self {
        RunRecorder {
            command: command.to_string(),
            config: serde_json::to_value(config).expect("settings serialize"),
            seed,
            start: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            extra_outputs: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// An output that is not a file, such as a response on stdout.
    pub fn output_bytes(&mut self, name: &str, bytes: &[u8]) {
        self.extra_outputs.insert(name.to_string(), sha256_hex(bytes));
    }

    /// Hashes everything and writes `<dir>/<command>.manifest.json`.
    pub fn finish(self, dir: &Path) -> Result<Manifest> {
        let hash_all = |paths: &[PathBuf]| -> Result<BTreeMap<String, String>> {
            paths.iter().map(|p| Ok((key(p), hash_file(p)?))).collect()
        };
        let mut output_hashes = hash_all(&self.outputs)?;
        output_hashes.extend(self.extra_outputs);
        let m = Manifest {
            command: self.command,
            config: self.config,
            input_hashes: hash_all(&self.inputs)?,
            output_hashes,
            seed: self.seed,
            duration_ms: self.start.elapsed().as_millis() as u64,
        };
        let path = manifest_path(dir, &m.command);
        let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io("write manifest", &path, e))?;
        Ok(m)
    }
}

pub fn manifest_path(dir: &Path, command: &str) -> PathBuf {
    dir.join(format!("{command}.manifest.json"))
}

pub fn read_manifest(dir: &Path, command: &str) -> Result<Manifest> {
    let path = manifest_path(dir, command);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io("read manifest", &path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Malformed {
        what: format!("manifest {}", path.display()),
        detail: e.to_string(),
    })
}
