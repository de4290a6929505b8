//! Experiment runner: config in, CSV reports and pass/fail checks out.

pub mod commands;
pub mod config;
pub mod report;

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

pub use commands::{
    cmd_barenblatt, cmd_decay, cmd_propagation, cmd_selftest, cmd_smoothing, cmd_solve, cmd_stability,
};
pub use config::ExperimentConfig;
pub use report::Report;

use crate::error::{Error, Result};
use crate::grid::Trajectory;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_PROPERTY: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Barenblatt,
    Solve,
    Stability,
    Propagation,
    Smoothing,
    Decay,
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Barenblatt => "barenblatt",
            Command::Solve => "solve",
            Command::Stability => "stability",
            Command::Propagation => "propagation",
            Command::Smoothing => "smoothing",
            Command::Decay => "decay",
            Command::Selftest => "selftest",
        }
    }
}

/// One asserted property of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub reports: Vec<Report>,
    /// Trajectories to persist as snapshot CSVs, keyed by file stem.
    pub snapshots: Vec<(String, Trajectory)>,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn report(&self, name: &str) -> Option<&Report> {
        self.reports.iter().find(|r| r.name == name)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn run(cmd: Command, cfg: &ExperimentConfig, seed: u64) -> Result<Outcome> {
    match cmd {
        Command::Barenblatt => cmd_barenblatt(cfg, seed),
        Command::Solve => cmd_solve(cfg),
        Command::Stability => cmd_stability(cfg),
        Command::Propagation => cmd_propagation(cfg),
        Command::Smoothing => cmd_smoothing(cfg),
        Command::Decay => cmd_decay(cfg),
        Command::Selftest => cmd_selftest(cfg, seed),
    }
}

/// Writes reports, snapshots and `manifest.txt`; returns the file list.
pub fn write_outcome(outcome: &Outcome, cmd: Command, cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let header = vec![
        ("command".to_string(), cmd.name().to_string()),
        ("config_sha256".to_string(), cfg.hash()),
        ("seed".to_string(), seed.to_string()),
        ("created_unix".to_string(), created.to_string()),
    ];
    let mut files = Vec::new();
    for r in &outcome.reports {
        files.push(r.write(dir, &header)?);
    }
    for (stem, traj) in &outcome.snapshots {
        files.extend(traj.save(dir, stem)?);
    }
    let mut manifest = String::new();
    for f in &files {
        manifest.push_str(f);
        manifest.push('\n');
    }
    fs::write(dir.join("manifest.txt"), manifest)?;
    files.push("manifest.txt".into());
    Ok(files)
}

/// Exit status for a finished run or a failure.
pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(o) if o.passed() => EXIT_PASS,
        Ok(_) => EXIT_PROPERTY,
        Err(e) if e.is_config() => EXIT_CONFIG,
        Err(_) => EXIT_NUMERICAL,
    }
}

pub(crate) fn wrap_solve(p: f64) -> impl FnOnce(Error) -> Error {
    move |e| Error::SolveFailed { p, source: Box::new(e) }
}
