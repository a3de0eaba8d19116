use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::Config;

/// Written as `manifest.json` next to every command's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: Config,
    pub seed: u64,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub tool_version: String,
    pub started_unix_secs: u64,
    pub wall_clock_secs: f64,
}

pub struct Recorder {
    manifest: RunManifest,
    start: Instant,
}

impl Recorder {
    pub fn new(command: &str, config: &Config) -> Self {
        let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Self {
            manifest: RunManifest {
                command: command.to_string(),
                argv: std::env::args().collect(),
                config: config.clone(),
                seed: config.seed(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                started_unix_secs: started,
                wall_clock_secs: 0.0,
            },
            start: Instant::now(),
        }
    }

    pub fn input(&mut self, p: impl AsRef<Path>) {
        self.manifest.inputs.push(p.as_ref().to_path_buf());
    }

    pub fn output(&mut self, p: impl AsRef<Path>) {
        self.manifest.outputs.push(p.as_ref().to_path_buf());
    }

    /// Writes `<dir>/manifest.json` and returns its path.
    pub fn finish(mut self, dir: &Path) -> Result<PathBuf> {
        self.manifest.wall_clock_secs = self.start.elapsed().as_secs_f64();
        let path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&self.manifest)?;
        std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
