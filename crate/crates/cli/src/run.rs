use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use rfdm_core::io::write_file;
use rfdm_core::Result;
use serde::Serialize;

use crate::config::PipelineConfig;

#[derive(Debug, Clone, Serialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written next to every subcommand's outputs. It is the
/// only artifact that carries wall-clock time.
#[derive(Debug, Serialize)]
pub struct RunLog {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub args: Vec<String>,
    pub master_seed: Option<u64>,
    pub config: Option<PipelineConfig>,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl RunLog {
    pub fn new(subcommand: &'static str, config: Option<&PipelineConfig>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            args: std::env::args().collect(),
            master_seed: config.map(|c| c.seed),
            config: config.cloned(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_unix_s: now(),
            finished_unix_s: 0,
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileHash::of(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(FileHash::of(path)?);
        Ok(())
    }

    pub fn finish(mut self, path: &Path) -> Result<()> {
        self.finished_unix_s = now();
        let mut bytes = serde_json::to_vec_pretty(&self)?;
        bytes.push(b'\n');
        write_file(path, &bytes)
    }
}
