use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use imlkit::diagnostics::AuditFinding;
use imlkit::experiments::Check;

/// Output directory that remembers what it wrote so a failed run can be
/// rolled back.
pub struct OutputDir {
    path: PathBuf,
    created: bool,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn open(path: &Path) -> io::Result<OutputDir> {
        let created = !path.exists();
        std::fs::create_dir_all(path)?;
        Ok(OutputDir { path: path.to_path_buf(), created, written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        let p = self.path.join(name);
        std::fs::write(&p, bytes)?;
        if !self.written.contains(&p) {
            self.written.push(p);
        }
        Ok(())
    }

    pub fn files(&self) -> Vec<String> {
        self.written.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect()
    }

    /// Deletes every file written so far, and the directory if this run
    /// created it and it is now empty.
    pub fn roll_back(&mut self) {
        for p in self.written.drain(..) {
            if let Err(e) = std::fs::remove_file(&p) {
                log::warn!("could not remove partial output {}: {e}", p.display());
            }
        }
        if self.created {
            let _ = std::fs::remove_dir(&self.path);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub status: Status,
    pub config_path: Option<String>,
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    pub seed_source: &'static str,
    pub derived_seeds: BTreeMap<String, u64>,
    pub threads: Option<usize>,
    pub metrics: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub failing_metrics: Vec<String>,
    pub audit: Vec<AuditFinding>,
    pub notes: Vec<String>,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl Report {
    pub fn new(command: &str, seed: u64, seed_source: &'static str) -> Report {
        Report {
            tool: "imlkit",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            status: Status::Pass,
            config_path: None,
            config: BTreeMap::new(),
            seed,
            seed_source,
            derived_seeds: BTreeMap::new(),
            threads: None,
            metrics: BTreeMap::new(),
            checks: Vec::new(),
            failing_metrics: Vec::new(),
            audit: Vec::new(),
            notes: Vec::new(),
            outputs: Vec::new(),
            wall_clock_seconds: 0.0,
        }
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    pub fn seed(&mut self, name: &str, seed: imlkit::RngSeed) {
        self.derived_seeds.insert(name.to_string(), seed.0);
    }

    /// Sets status and failing metrics from the checks.
    pub fn settle(&mut self) {
        self.failing_metrics = self.checks.iter().filter(|c| !c.pass).map(|c| c.metric.clone()).collect();
        self.status = if self.failing_metrics.is_empty() { Status::Pass } else { Status::Fail };
    }
}
