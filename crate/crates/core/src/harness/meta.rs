//! `run.json`: one record per invocation (config echo, version, wall time).
//! It is the only output allowed to differ between identical runs.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use super::RunConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub command: String,
    pub version: &'static str,
    pub config: RunConfig,
    pub started_unix_ms: u128,
    pub wall_seconds: f64,
    pub outputs: Vec<PathBuf>,
    pub failures: Vec<String>,
}

impl RunMetadata {
    pub fn new(command: impl Into<String>, config: RunConfig, started_unix_ms: u128) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION"),
            config,
            started_unix_ms,
            wall_seconds: 0.0,
            outputs: Vec::new(),
            failures: Vec::new(),
        }
    }
}

pub fn unix_millis() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

/// Appends `meta` to the JSON array in `<dir>/run.json`.
pub fn write_metadata(meta: &RunMetadata, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("run.json");
    let bad = |e: serde_json::Error| Error::Parse(format!("{}: {e}", path.display()));
    let mut records: Vec<serde_json::Value> = match std::fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text).map_err(bad)?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    records.push(serde_json::to_value(meta).map_err(bad)?);
    let json = serde_json::to_string_pretty(&records).map_err(bad)?;
    std::fs::write(&path, json + "\n")?;
    Ok(path)
}
