//! Monte-Carlo engine and scheme comparison.
//!
//! Four schemes are compared on common channel draws:
//!
//! | scheme | precoder | downlink powers |
//! |---|---|---|
//! | `RZF-uniform` | conventional RZF | `rho_dl` for all users |
//! | `RZF-maxmin` | conventional RZF | max-min on sample SINRs, empirical duality |
//! | `MCA-RZF-uniform` | MCA-RZF with `p = rho_dl` | `rho_dl` for all users |
//! | `MCA-RZF-maxmin` | MCA-RZF with max-min powers | max-min and duality from statistics only |

mod montecarlo;
pub mod oracle;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use montecarlo::{cross_gains, empirical_dl_sinr, empirical_ul_sinr, link_statistics, DropContext, PrecoderRecipe};

use crate::error::{Error, ErrorKind, Result};
use crate::power::{
    dl_powers, duality_operands_asymptotic, duality_operands_empirical, maxmin_ul_powers, MaxMinOptions, PowerSolution,
};
use crate::rmt::{AsymptoticModel, DetEquilibrium, FixedPointOptions};
use crate::scenario::{db_to_linear, derive_seed, SystemConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SchemeId {
    #[serde(rename = "RZF-uniform")]
    RzfUniform,
    #[serde(rename = "RZF-maxmin")]
    RzfMaxmin,
    #[serde(rename = "MCA-RZF-uniform")]
    McaUniform,
    #[serde(rename = "MCA-RZF-maxmin")]
    McaMaxmin,
}

impl SchemeId {
    pub const ALL: [SchemeId; 4] = [SchemeId::RzfUniform, SchemeId::RzfMaxmin, SchemeId::McaUniform, SchemeId::McaMaxmin];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::RzfUniform => "RZF-uniform",
            SchemeId::RzfMaxmin => "RZF-maxmin",
            SchemeId::McaUniform => "MCA-RZF-uniform",
            SchemeId::McaMaxmin => "MCA-RZF-maxmin",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        SchemeId::ALL
            .into_iter()
            .find(|id| id.name().to_ascii_lowercase() == norm || id.name().to_ascii_lowercase().replace("mca-rzf", "mca") == norm)
            .ok_or_else(|| format!("unknown scheme {s:?}"))
    }
}

/// Network-wide minimum rate `log2(1 + min SINR)` in bit/s/Hz.
pub fn min_rate(sinrs: &[f64]) -> f64 {
    let m = sinrs.iter().copied().fold(f64::INFINITY, f64::min);
    if m.is_finite() {
        (1.0 + m.max(0.0)).log2()
    } else {
        0.0
    }
}

/// Result of one scheme on one drop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeDrop {
    pub dl_sinr: Vec<f64>,
    pub dl_powers: Vec<f64>,
    /// Uplink powers of the dual problem, when the scheme has one.
    pub ul_powers: Vec<f64>,
    pub min_rate: f64,
}

impl SchemeDrop {
    fn new(dl_sinr: Vec<f64>, dl_powers: Vec<f64>, ul_powers: Vec<f64>) -> Self {
        let min_rate = min_rate(&dl_sinr);
        Self { dl_sinr, dl_powers, ul_powers, min_rate }
    }
}

/// Asymptotic max-min design: uplink powers, equilibrium and downlink powers.
#[derive(Clone, Debug)]
pub struct AsymptoticDesign {
    pub solution: PowerSolution,
    pub equilibrium: DetEquilibrium,
}

/// Algorithm 1 on the deterministic SINR, then the deterministic duality map.
pub fn asymptotic_maxmin(ctx: &DropContext) -> Result<AsymptoticDesign> {
    let model = AsymptoticModel::new(&ctx.cov, &ctx.stats);
    let fp = FixedPointOptions::from_config(&ctx.config);
    let mut last: Option<DetEquilibrium> = None;
    let mut solution = maxmin_ul_powers(
        model.dims().lk(),
        |p| {
            let eq = model.equilibrium(p, fp)?;
            let s = eq.ul_sinr();
            last = Some(eq);
            Ok(s)
        },
        MaxMinOptions::from_config(&ctx.config),
    )?;
    let equilibrium = last.expect("at least one evaluation");
    let ops = duality_operands_asymptotic(&equilibrium, &solution.ul_sinr);
    solution.dl_powers = dl_powers(&ops)?;
    Ok(AsymptoticDesign { solution, equilibrium })
}

/// Algorithm 1 on sample SINRs, then the empirical duality map.
pub fn empirical_maxmin(stats: &crate::power::LinkStatistics, config: &SystemConfig) -> Result<PowerSolution> {
    let mut sol = maxmin_ul_powers(stats.users(), |p| Ok(stats.ul_sinr(p)), MaxMinOptions::from_config(config))?;
    let ops = duality_operands_empirical(stats, &sol.ul_sinr);
    sol.dl_powers = dl_powers(&ops)?;
    Ok(sol)
}

/// Run every requested scheme on one drop with common channel draws.
pub fn evaluate_drop(ctx: &DropContext, schemes: &[SchemeId], mc_seed: u64) -> Vec<(SchemeId, Result<SchemeDrop>)> {
    let cfg = &ctx.config;
    let lk = cfg.dims().lk();
    let uniform = vec![cfg.rho_dl; lk];
    let wants = |s: SchemeId| schemes.contains(&s);

    let design = wants(SchemeId::McaMaxmin).then(|| asymptotic_maxmin(ctx));

    let mut recipes = Vec::new();
    let slot = |r: PrecoderRecipe, recipes: &mut Vec<PrecoderRecipe>| {
        recipes.push(r);
        recipes.len() - 1
    };
    let rzf = (wants(SchemeId::RzfUniform) || wants(SchemeId::RzfMaxmin))
        .then(|| slot(PrecoderRecipe::Rzf { alpha: cfg.alpha() }, &mut recipes));
    let mca_u = wants(SchemeId::McaUniform).then(|| slot(PrecoderRecipe::Mca { powers: uniform.clone() }, &mut recipes));
    let mca_m = match &design {
        Some(Ok(d)) => Some(slot(PrecoderRecipe::Mca { powers: d.solution.ul_powers.clone() }, &mut recipes)),
        _ => None,
    };
    let stats = link_statistics(ctx, &recipes, cfg.mc_trials, mc_seed);

    schemes
        .iter()
        .map(|&s| {
            let out = match &stats {
                Err(e) => Err(e.clone()),
                Ok(stats) => match s {
                    SchemeId::RzfUniform => {
                        let st = &stats[rzf.expect("rzf slot")];
                        Ok(SchemeDrop::new(st.dl_sinr(&uniform), uniform.clone(), Vec::new()))
                    }
                    SchemeId::McaUniform => {
                        let st = &stats[mca_u.expect("mca slot")];
                        Ok(SchemeDrop::new(st.dl_sinr(&uniform), uniform.clone(), uniform.clone()))
                    }
                    SchemeId::RzfMaxmin => {
                        let st = &stats[rzf.expect("rzf slot")];
                        empirical_maxmin(st, cfg).map(|sol| SchemeDrop::new(st.dl_sinr(&sol.dl_powers), sol.dl_powers, sol.ul_powers))
                    }
                    SchemeId::McaMaxmin => match (&design, mca_m) {
                        (Some(Ok(d)), Some(i)) => {
                            let p = d.solution.dl_powers.clone();
                            Ok(SchemeDrop::new(stats[i].dl_sinr(&p), p, d.solution.ul_powers.clone()))
                        }
                        (Some(Err(e)), _) => Err(e.clone()),
                        _ => unreachable!("design requested"),
                    },
                },
            };
            (s, out)
        })
        .collect()
}

/// Swept parameter of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    /// `rho_dl = rho_tr` in dB.
    Snr(Vec<f64>),
    Antennas(Vec<usize>),
}

impl Sweep {
    pub fn name(&self) -> &'static str {
        match self {
            Sweep::Snr(_) => "rho_db",
            Sweep::Antennas(_) => "antennas",
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Sweep::Snr(v) => v.clone(),
            Sweep::Antennas(v) => v.iter().map(|&n| n as f64).collect(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Sweep::Snr(v) => v.len(),
            Sweep::Antennas(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Configuration at sweep point `i`.
    pub fn apply(&self, base: &SystemConfig, i: usize) -> SystemConfig {
        let mut c = base.clone();
        match self {
            Sweep::Snr(v) => {
                c.rho_dl = db_to_linear(v[i]);
                c.rho_tr = c.rho_dl;
            }
            Sweep::Antennas(v) => c.antennas = v[i],
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropRecord {
    pub drop: usize,
    pub seed: u64,
    pub min_rate: Option<f64>,
    pub dl_sinr: Vec<f64>,
    pub error: Option<String>,
    pub error_kind: Option<ErrorKind>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    pub scheme: SchemeId,
    /// Mean over drops; `None` when any drop failed.
    pub min_rate: Option<f64>,
    pub drops: Vec<DropRecord>,
}

impl SchemeSummary {
    pub fn failed(&self) -> bool {
        self.min_rate.is_none()
    }

    /// Kind of the first failed drop.
    pub fn failure(&self) -> Option<ErrorKind> {
        self.drops.iter().find_map(|d| d.error_kind)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub sweep_value: f64,
    pub config: SystemConfig,
    pub schemes: Vec<SchemeSummary>,
}

impl PointResult {
    pub fn scheme(&self, s: SchemeId) -> Option<&SchemeSummary> {
        self.schemes.iter().find(|x| x.scheme == s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub sweep_name: String,
    pub points: Vec<PointResult>,
    pub wall_time_s: f64,
}

/// Progress notification after each finished drop.
#[derive(Clone, Copy, Debug)]
pub struct Progress {
    pub point: usize,
    pub points: usize,
    pub drop: usize,
    pub drops: usize,
}

/// Seeds of drop `d` under master seed `master`: (geometry, Monte-Carlo).
pub fn drop_seeds(master: u64, d: usize) -> (u64, u64) {
    let s = derive_seed(master, d as u64);
    (derive_seed(s, 0), derive_seed(s, 1))
}

/// Sweep every point, evaluating all schemes on `n_drops` drops each.
///
/// Drop `d` uses the same geometry seed at every sweep point. Per-scheme
/// failures are recorded and do not abort the sweep.
pub fn run_experiment(
    config: &SystemConfig,
    sweep: &Sweep,
    schemes: &[SchemeId],
    progress: &mut dyn FnMut(Progress),
) -> Result<ExperimentResult> {
    config.validate()?;
    if sweep.is_empty() {
        return Err(Error::Config(vec!["sweep has no points".into()]));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::Config(vec![format!("thread pool: {e}")]))?;
    let start = Instant::now();
    let values = sweep.values();
    let mut points = Vec::with_capacity(values.len());
    for (i, &value) in values.iter().enumerate() {
        let cfg = sweep.apply(config, i);
        cfg.validate()?;
        let mut records: Vec<Vec<DropRecord>> = vec![Vec::new(); schemes.len()];
        for d in 0..cfg.n_drops {
            let (geo_seed, mc_seed) = drop_seeds(cfg.seed, d);
            let outcome = pool.install(|| match DropContext::generate(&cfg, geo_seed) {
                Ok(ctx) => evaluate_drop(&ctx, schemes, mc_seed),
                Err(e) => schemes.iter().map(|&s| (s, Err(e.clone()))).collect(),
            });
            for (r, (_, res)) in records.iter_mut().zip(outcome) {
                r.push(match res {
                    Ok(x) => DropRecord { drop: d, seed: geo_seed, min_rate: Some(x.min_rate), dl_sinr: x.dl_sinr, error: None, error_kind: None },
                    Err(e) => DropRecord { drop: d, seed: geo_seed, min_rate: None, dl_sinr: Vec::new(), error: Some(e.to_string()), error_kind: Some(e.kind()) },
                });
            }
            progress(Progress { point: i, points: values.len(), drop: d, drops: cfg.n_drops });
        }
        let summaries = schemes
            .iter()
            .zip(records)
            .map(|(&scheme, drops)| {
                let rates: Option<Vec<f64>> = drops.iter().map(|r| r.min_rate).collect();
                let min_rate = rates.map(|r| r.iter().sum::<f64>() / r.len() as f64);
                SchemeSummary { scheme, min_rate, drops }
            })
            .collect();
        points.push(PointResult { sweep_value: value, config: cfg, schemes: summaries });
    }
    Ok(ExperimentResult { sweep_name: sweep.name().to_string(), points, wall_time_s: start.elapsed().as_secs_f64() })
}
