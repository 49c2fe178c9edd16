//! CSV table and JSON sidecar writers.

use std::fs;
use std::io::Write;
use std::path::Path;

use mcarzf::sim::{ExperimentResult, Sweep};
use serde::{Deserialize, Serialize};

use crate::manifest::RunManifest;
use crate::CliError;

pub const CSV_HEADER: [&str; 7] = ["scheme", "sweep_name", "sweep_value", "min_rate_bits", "n_drops", "mc_trials", "failed"];

/// Everything written next to the CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub manifest: RunManifest,
    pub result: ExperimentResult,
}

fn format_point(sweep: &Sweep, value: f64) -> String {
    match sweep {
        Sweep::Antennas(_) => format!("{}", value as usize),
        Sweep::Snr(_) => format!("{value}"),
    }
}

/// One row per (scheme, point), grouped by scheme in manifest order.
pub fn csv_bytes(manifest: &RunManifest, result: &ExperimentResult) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for &scheme in &manifest.schemes {
        for point in &result.points {
            let Some(s) = point.scheme(scheme) else { continue };
            let rate = s.min_rate.map(|r| format!("{r}")).unwrap_or_default();
            w.write_record([
                scheme.name().to_string(),
                result.sweep_name.clone(),
                format_point(&manifest.sweep, point.sweep_value),
                rate,
                point.config.n_drops.to_string(),
                point.config.mc_trials.to_string(),
                s.failed().to_string(),
            ])?;
        }
    }
    w.into_inner().map_err(|e| CliError::Csv(e.into_error().into()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e| CliError::Io { path: path.to_path_buf(), source: e };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(bytes).map_err(io)
}

pub fn write_outputs(manifest: &RunManifest, result: &ExperimentResult) -> Result<(), CliError> {
    write_file(&manifest.csv_path, &csv_bytes(manifest, result)?)?;
    let sidecar = Sidecar { manifest: manifest.clone(), result: result.clone() };
    let mut json = serde_json::to_vec_pretty(&sidecar)?;
    json.push(b'\n');
    write_file(&manifest.json_path, &json)
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
    Ok(serde_json::from_str(&text)?)
}
