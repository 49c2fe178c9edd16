//! Config file parsing, flag overrides and the resolved run manifest.

use std::path::{Path, PathBuf};

use mcarzf::scenario::db_to_linear;
use mcarzf::sim::{SchemeId, Sweep};
use mcarzf::SystemConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_SNR_DB: [f64; 7] = [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0];
pub const DEFAULT_ANTENNAS: [usize; 5] = [20, 40, 60, 80, 100];

/// `[sweep]` table. At most one of the two keys may be present.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub rho_db: Option<Vec<f64>>,
    pub antennas: Option<Vec<usize>>,
}

/// Contents of a TOML config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub system: SystemConfig,
    pub sweep: SweepSpec,
    pub schemes: Option<Vec<SchemeId>>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(vec![e.to_string()]))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(v) => CliError::Config(v.into_iter().map(|m| format!("{}: {m}", path.display())).collect()),
            other => other,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Snr,
    Antennas,
}

impl SweepKind {
    pub fn file_stem(self) -> &'static str {
        match self {
            SweepKind::Snr => "sweep_snr",
            SweepKind::Antennas => "sweep_antennas",
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub drops: Option<usize>,
    pub trials: Option<usize>,
    pub threads: Option<usize>,
    pub schemes: Option<Vec<SchemeId>>,
    /// Sweep points: dB values or antenna counts depending on the sweep.
    pub points: Option<Vec<f64>>,
    /// Fixed antenna count of an SNR sweep.
    pub antennas: Option<usize>,
    /// Fixed `rho_dl = rho_tr` in dB of an antenna sweep.
    pub rho_db: Option<f64>,
}

/// Fully resolved description of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub config: SystemConfig,
    pub sweep: Sweep,
    pub schemes: Vec<SchemeId>,
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
    pub tool_version: String,
    pub timestamp: String,
    pub seed: u64,
}

fn antenna_points(values: &[f64], errors: &mut Vec<String>) -> Vec<usize> {
    values
        .iter()
        .filter_map(|&v| {
            if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Some(v as usize)
            } else {
                errors.push(format!("antenna sweep point {v} is not a positive integer"));
                None
            }
        })
        .collect()
}

/// Merge file, flags and defaults into a manifest, reporting every problem
/// at once.
pub fn resolve(file: FileConfig, kind: SweepKind, ov: &Overrides, out_dir: &Path) -> Result<RunManifest, CliError> {
    let mut errors = Vec::new();
    let mut cfg = file.system;
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    if let Some(d) = ov.drops {
        cfg.n_drops = d;
    }
    if let Some(t) = ov.trials {
        cfg.mc_trials = t;
    }
    if let Some(t) = ov.threads {
        cfg.threads = t;
    }
    if let Some(n) = ov.antennas {
        if kind == SweepKind::Antennas {
            errors.push("--antennas fixes N and cannot be combined with an antenna sweep".into());
        }
        cfg.antennas = n;
    }
    if let Some(db) = ov.rho_db {
        if kind == SweepKind::Snr {
            errors.push("--rho-db fixes the SNR and cannot be combined with an SNR sweep".into());
        }
        cfg.rho_dl = db_to_linear(db);
        cfg.rho_tr = cfg.rho_dl;
    }

    let spec = file.sweep;
    if spec.rho_db.is_some() && spec.antennas.is_some() {
        errors.push("sweep specifies both rho_db and antennas".into());
    }
    match kind {
        SweepKind::Snr if spec.antennas.is_some() => errors.push("sweep-snr given an antenna sweep in the config".into()),
        SweepKind::Antennas if spec.rho_db.is_some() => errors.push("sweep-antennas given an SNR sweep in the config".into()),
        _ => {}
    }
    let sweep = match kind {
        SweepKind::Snr => {
            let v = ov.points.clone().or(spec.rho_db).unwrap_or_else(|| DEFAULT_SNR_DB.to_vec());
            if let Some(x) = v.iter().find(|x| !x.is_finite()) {
                errors.push(format!("SNR sweep point {x} is not finite"));
            }
            Sweep::Snr(v)
        }
        SweepKind::Antennas => {
            let v = match (&ov.points, spec.antennas) {
                (Some(p), _) => antenna_points(p, &mut errors),
                (None, Some(a)) => a,
                (None, None) => DEFAULT_ANTENNAS.to_vec(),
            };
            if v.contains(&0) {
                errors.push("antenna sweep point 0".into());
            }
            Sweep::Antennas(v)
        }
    };
    if sweep.is_empty() {
        errors.push("sweep has no points".into());
    }
    let schemes = ov.schemes.clone().or(file.schemes).unwrap_or_else(|| SchemeId::ALL.to_vec());
    if schemes.is_empty() {
        errors.push("no schemes selected".into());
    }
    if let Err(mcarzf::Error::Config(v)) = cfg.validate() {
        errors.extend(v);
    }
    if !errors.is_empty() {
        return Err(CliError::Config(errors));
    }
    let stem = kind.file_stem();
    Ok(RunManifest {
        seed: cfg.seed,
        config: cfg,
        sweep,
        schemes,
        csv_path: out_dir.join(format!("{stem}.csv")),
        json_path: out_dir.join(format!("{stem}.json")),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    })
}

/// Parse a comma-separated list of scheme names.
pub fn parse_schemes(s: &str) -> Result<Vec<SchemeId>, String> {
    s.split(',').filter(|x| !x.trim().is_empty()).map(str::parse).collect()
}
