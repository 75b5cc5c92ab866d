use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::certify::Certificate;
use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::experiment::{Experiment, IterationRecord, ScenarioResult, AXIS_NAMES};

const CSV_HEADER: [&str; 8] = [
    "iteration",
    "axis",
    "sample",
    "time",
    "desired",
    "actual",
    "reference_input",
    "d_hat",
];

/// One row of a per-run CSV file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub iteration: usize,
    pub axis: String,
    pub sample: usize,
    pub time: f64,
    pub desired: f64,
    pub actual: f64,
    pub reference_input: f64,
    pub d_hat: f64,
}

/// Writes every sample of every axis of `records`; samples are 1-based.
pub fn write_records_csv<W: Write>(writer: W, records: &[IterationRecord], sample_dt: f64) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in records {
        for (a, trace) in r.axes.iter().enumerate() {
            for k in 0..trace.desired.len() {
                w.write_record([
                    r.iteration.to_string(),
                    AXIS_NAMES[a].to_string(),
                    (k + 1).to_string(),
                    (k as f64 * sample_dt).to_string(),
                    trace.desired[k].to_string(),
                    trace.actual[k].to_string(),
                    trace.reference_input[k].to_string(),
                    trace.d_hat[k].to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for row in r.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

#[derive(Serialize)]
struct Timing {
    prelude: Vec<f64>,
    sets: Vec<Vec<f64>>,
}

fn csv_bytes(records: &[IterationRecord], sample_dt: f64) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_records_csv(&mut buf, records, sample_dt)?;
    Ok(buf)
}

/// Deterministic artifacts of a run, keyed by file name.
fn artifacts(
    cfg: &ExperimentConfig,
    result: &ScenarioResult,
    certificates: &[Certificate],
) -> Result<Vec<(String, Vec<u8>)>> {
    let dt = cfg.sample_dt();
    let mut files = vec![
        ("config.json".to_string(), cfg.to_json()?.into_bytes()),
        ("prelude.csv".to_string(), csv_bytes(&result.prelude, dt)?),
    ];
    for (k, set) in result.sets.iter().enumerate() {
        files.push((format!("set_{}.csv", k + 1), csv_bytes(set, dt)?));
    }
    files.push((
        "summary.json".to_string(),
        serde_json::to_string_pretty(&result.summary)?.into_bytes(),
    ));
    if !certificates.is_empty() {
        files.push((
            "certificate.json".to_string(),
            serde_json::to_string_pretty(certificates)?.into_bytes(),
        ));
    }
    Ok(files)
}

/// Writes the run directory. Wall times go to `timing.json`, which replay
/// ignores.
pub fn write_run(dir: &Path, experiment: &Experiment, result: &ScenarioResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (name, bytes) in artifacts(experiment.config(), result, experiment.certificates())? {
        fs::write(dir.join(name), bytes)?;
    }
    let timing = Timing {
        prelude: result.prelude.iter().map(|r| r.wall_time).collect(),
        sets: result
            .sets
            .iter()
            .map(|s| s.iter().map(|r| r.wall_time).collect())
            .collect(),
    };
    fs::write(dir.join("timing.json"), serde_json::to_string_pretty(&timing)?)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplayReport {
    pub files_compared: usize,
    pub mismatched: Vec<String>,
}

impl ReplayReport {
    pub fn identical(&self) -> bool {
        self.mismatched.is_empty()
    }
}

/// Re-runs the configuration stored in `dir` and compares every artifact
/// byte for byte.
pub fn replay(dir: &Path) -> Result<ReplayReport> {
    let cfg = ExperimentConfig::load(&dir.join("config.json"))?;
    let experiment = Experiment::new(cfg)?;
    let result = experiment.run_scenario()?;
    let mut report = ReplayReport {
        files_compared: 0,
        mismatched: Vec::new(),
    };
    for (name, bytes) in artifacts(experiment.config(), &result, experiment.certificates())? {
        let path = dir.join(&name);
        let stored = fs::read(&path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        report.files_compared += 1;
        if stored != bytes {
            report.mismatched.push(name);
        }
    }
    Ok(report)
}
