//! Run manifest written next to every output directory.

use anyhow::{Context, Result};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

pub const FILE_NAME: &str = "manifest.json";

#[derive(Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Vec<String>,
    pub scenario_hash: Option<String>,
    pub train_config_hash: Option<String>,
    pub seeds: Vec<u64>,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    pub status: &'static str,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
    #[serde(skip)]
    path: PathBuf,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl Manifest {
    /// Create `dir` and record the run as started.
    pub fn begin(dir: &Path, scenario_hash: Option<String>, train_config_hash: Option<String>, seeds: Vec<u64>) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        let m = Self {
            tool: "qff",
            version: env!("CARGO_PKG_VERSION"),
            command: std::env::args().collect(),
            scenario_hash,
            train_config_hash,
            seeds,
            started_unix: now(),
            finished_unix: None,
            status: "running",
            outputs: Vec::new(),
            path: dir.join(FILE_NAME),
        };
        m.write()?;
        Ok(m)
    }

    fn write(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(&self.path, text).with_context(|| format!("writing {}", self.path.display()))
    }

    pub fn output(&mut self, rel: impl Into<String>) {
        self.outputs.push(rel.into());
    }

    /// Record the final status; a failed run keeps its original error.
    pub fn finish<T>(mut self, result: Result<T>) -> Result<T> {
        self.finished_unix = Some(now());
        self.status = if result.is_ok() { "completed" } else { "failed" };
        let written = self.write();
        let value = result?;
        written?;
        Ok(value)
    }
}
