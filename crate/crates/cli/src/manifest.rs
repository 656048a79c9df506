//! Run manifests: everything needed to reproduce an artifact.

use crate::error::CliResult;
use crate::io::{sha256_file, sidecar, write_json};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub parallel_build: bool,
}

impl Manifest {
    pub fn new(command: &str, parameters: serde_json::Value, seed: Option<u64>) -> Self {
        Manifest {
            tool: "gfield".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            parameters,
            seed,
            inputs: vec![],
            outputs: vec![],
            parallel_build: gfield::par::is_parallel(),
        }
    }

    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        self.inputs.push(FileRecord { path: path.to_path_buf(), sha256: sha256_file(path)? });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> CliResult<()> {
        self.outputs.push(FileRecord { path: path.to_path_buf(), sha256: sha256_file(path)? });
        Ok(())
    }

    /// Write next to `primary` as `<primary>.manifest.json`.
    pub fn write_for(&self, primary: &Path) -> CliResult<PathBuf> {
        let p = sidecar(primary, ".manifest.json");
        write_json(&p, self)?;
        Ok(p)
    }
}
