//! Output bookkeeping: every artifact is hashed as it is written.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_path: Option<PathBuf>,
    pub seed: u64,
    pub outputs: Vec<OutputDigest>,
    pub wall_time_ms: u64,
}

impl RunManifest {
    pub const FILE: &'static str = "manifest.json";

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(self).map_err(|e| CliError::config(e.to_string()))?;
        bytes.push(b'\n');
        std::fs::write(dir.join(Self::FILE), bytes).map_err(|e| io_error(dir, e))
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::config(format!("{}: {e}", path.display()))
}

/// Collects the files written by one command.
#[derive(Debug, Default)]
pub struct Outputs {
    dir: Option<PathBuf>,
    digests: Vec<OutputDigest>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        Ok(Self { dir: Some(dir.to_path_buf()), digests: Vec::new() })
    }

    /// Hashes outputs without touching the file system.
    pub fn discard() -> Self {
        Self::default()
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        if let Some(dir) = &self.dir {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
        }
        self.digests.push(OutputDigest { path: name.to_string(), sha256: hex::encode(Sha256::digest(bytes)) });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::config(e.to_string()))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn digests(&self) -> &[OutputDigest] {
        &self.digests
    }
}
