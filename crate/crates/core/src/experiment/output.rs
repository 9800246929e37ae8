use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{Axis, ConvergenceRow, Experiment, ExperimentConfig, RunResults};
use crate::Result;

pub const RESULTS_FILE: &str = "results.json";
pub const SCALARS_FILE: &str = "scalars.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// One scalar of one realization; a line of `scalars.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarRow {
    pub experiment: Experiment,
    pub realization: usize,
    pub seed: u64,
    pub scalar: String,
    pub value: f64,
}

/// Provenance of a run. Everything except the timestamps is a function of
/// the configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub code_version: String,
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<PathBuf>,
    pub realizations: usize,
    pub failures: usize,
    pub violations: usize,
}

fn stamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn new(cfg: &ExperimentConfig, results: &RunResults, started: DateTime<Utc>, outputs: Vec<PathBuf>) -> Self {
        Self {
            config_hash: results.config_hash.clone(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: cfg.disorder.master_seed,
            seeds: results.seeds.clone(),
            started: stamp(started),
            finished: stamp(Utc::now()),
            outputs,
            realizations: results.seeds.len(),
            failures: results.failures.len(),
            violations: results.violations.len(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_string_pretty(self).expect("manifest serializes") + "\n")?;
        Ok(path)
    }
}

fn hash_header(w: &mut impl Write, hash: &str) -> Result<()> {
    writeln!(w, "# config_hash={hash}")?;
    Ok(())
}

fn csv_error(e: csv::Error) -> crate::Error {
    crate::Error::Io(std::io::Error::other(e))
}

/// Writes `results.json` and `scalars.csv`; returns their paths.
pub(super) fn write_run(dir: &Path, results: &RunResults) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let json_path = dir.join(RESULTS_FILE);
    fs::write(&json_path, serde_json::to_string_pretty(results).expect("results serialize") + "\n")?;

    let csv_path = dir.join(SCALARS_FILE);
    let mut file = fs::File::create(&csv_path)?;
    hash_header(&mut file, &results.config_hash)?;
    let mut w = csv::Writer::from_writer(file);
    for row in &results.scalars {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(vec![json_path, csv_path])
}

/// Writes a convergence table: the axis value, every scalar, and the residual.
pub fn write_convergence_csv(path: &Path, config_hash: &str, axis: Axis, rows: &[ConvergenceRow]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut file = fs::File::create(path)?;
    hash_header(&mut file, config_hash)?;
    let mut w = csv::Writer::from_writer(file);
    if let Some(first) = rows.first() {
        let mut header = vec![axis.to_string()];
        header.extend(first.scalars.iter().map(|(k, _)| k.clone()));
        header.push("residual".into());
        w.write_record(&header).map_err(csv_error)?;
    }
    for row in rows {
        let mut rec = vec![row.value.to_string()];
        rec.extend(row.scalars.iter().map(|(_, v)| v.to_string()));
        rec.push(row.residual.to_string());
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}
