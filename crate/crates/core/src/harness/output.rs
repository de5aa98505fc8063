use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use super::RunConfig;
use crate::error::Result;
use crate::stats::Estimate;

/// Everything needed to reproduce and audit a run.
#[derive(Clone, Debug, Serialize)]
pub struct RunResult {
    pub command: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub seed: u64,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub rows: Vec<Estimate>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub report: serde_json::Value,
}

pub(crate) fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunResult {
    /// Starts a record; the config is stored in canonical form.
    pub fn start(command: &str, config: &RunConfig) -> Result<Self> {
        Ok(RunResult {
            command: command.to_string(),
            config: config.canonical()?,
            config_hash: config.content_hash()?,
            seed: config.seed,
            started_unix: unix_now(),
            finished_unix: 0,
            rows: Vec::new(),
            report: serde_json::Value::Null,
        })
    }

    pub fn finish(mut self, rows: Vec<Estimate>, report: serde_json::Value) -> Self {
        self.rows = rows;
        self.report = report;
        self.finished_unix = unix_now();
        self
    }

    /// Writes `results.csv` and `manifest.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_csv(&dir.join("results.csv"), &self.rows)?;
        write_json(&dir.join("manifest.json"), self)
    }
}

/// CSV with the fixed header `observable,N,mean,stderr,M`.
pub fn write_csv(path: &Path, rows: &[Estimate]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(["observable", "N", "mean", "stderr", "M"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<Estimate>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| Ok(row?)).collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}
