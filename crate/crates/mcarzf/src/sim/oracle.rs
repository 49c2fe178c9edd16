//! Monte-Carlo cross-checks of the deterministic equivalents.
//!
//! These are used by tests and the `validate` command, never by the
//! production pipeline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::montecarlo::{link_statistics, DropContext, PrecoderRecipe, Prepared};
use super::{asymptotic_maxmin, cross_gains};
use crate::error::Result;
use crate::linalg::C64;
use crate::power::{dl_powers, duality_operands_asymptotic, duality_operands_empirical};
use crate::rmt::{AsymptoticModel, DetEquilibrium, FixedPointOptions};

const CHUNK: usize = 8;

/// One deterministic quantity per user next to its sample counterpart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleQuantity {
    pub name: String,
    pub asymptotic: Vec<f64>,
    pub empirical: Vec<f64>,
}

fn rel_err(a: f64, e: f64) -> f64 {
    let d = (a - e).abs();
    if d == 0.0 {
        0.0
    } else {
        d / e.abs().max(f64::MIN_POSITIVE)
    }
}

impl OracleQuantity {
    pub fn new(name: &str, asymptotic: Vec<f64>, empirical: Vec<f64>) -> Self {
        Self { name: name.to_string(), asymptotic, empirical }
    }

    pub fn rel_errors(&self) -> Vec<f64> {
        self.asymptotic.iter().zip(&self.empirical).map(|(a, e)| rel_err(*a, *e)).collect()
    }

    pub fn max_rel_error(&self) -> f64 {
        self.rel_errors().into_iter().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub antennas: usize,
    pub trials: usize,
    pub quantities: Vec<OracleQuantity>,
}

impl OracleReport {
    pub fn get(&self, name: &str) -> Option<&OracleQuantity> {
        self.quantities.iter().find(|q| q.name == name)
    }
}

#[derive(Clone)]
struct Sums {
    loo: Vec<f64>,
    useful: Vec<C64>,
    norm: Vec<f64>,
    contamination: Vec<f64>,
    interference: Vec<f64>,
}

impl Sums {
    fn new(lk: usize) -> Self {
        Self {
            loo: vec![0.0; lk],
            useful: vec![C64::new(0.0, 0.0); lk],
            norm: vec![0.0; lk],
            contamination: vec![0.0; lk],
            interference: vec![0.0; lk],
        }
    }

    fn merge(&mut self, o: &Sums) {
        let add = |a: &mut [f64], b: &[f64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.loo, &o.loo);
        add(&mut self.norm, &o.norm);
        add(&mut self.contamination, &o.contamination);
        add(&mut self.interference, &o.interference);
        self.useful.iter_mut().zip(&o.useful).for_each(|(x, y)| *x += y);
    }
}

/// Compare the resolvent quantities behind the asymptotic SINR with sample
/// averages over `trials` draws of the unnormalized MCA-RZF detectors.
///
/// Quantities, per user `(l,q)` with `u = (sum p (g g^H + D) + I)^-1 g`:
/// - `xi`: `E ||u||^2`
/// - `delta_check`: `E y` with `y = g^H L_q^-1 g / N` the leave-one-out form
/// - `useful`: `|E u^H g| (1 + delta)`
/// - `contamination`: same-pilot interference `sum_{m != l} p E|u^H g_lmq|^2`
/// - `interference`: other-pilot interference `sum_{m, w != q} p E|u^H g_lmw|^2`
pub fn appendix_b_oracle(ctx: &DropContext, powers: &[f64], eq: &DetEquilibrium, trials: usize, seed: u64) -> Result<OracleReport> {
    let d = ctx.cov.dims();
    let lk = d.lk();
    let recipe = PrecoderRecipe::Mca { powers: powers.to_vec() };
    let prepared = Prepared::new(&recipe, &ctx.stats);
    let chunks = trials.div_ceil(CHUNK);
    let parts: Vec<Result<Sums>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut s = Sums::new(lk);
            for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let (ch, est) = ctx.trial(seed, t);
                let v = prepared.build(&est)?;
                let x = cross_gains(&v, &ch);
                for l in 0..d.cells {
                    for q in 0..d.users {
                        let i = d.ut(l, q);
                        let un = v.u_norm_sq[i];
                        let scale = un.sqrt();
                        // x = g^H u = g^H L^-1 g / N, real and positive.
                        let xg = (v.v[l].column(q).dotc(&est.ghat(l, l, q)) * scale).re;
                        s.loo[i] += xg / (1.0 - powers[i] * xg);
                        s.useful[i] += x[(i, i)] * scale;
                        s.norm[i] += un;
                        for m in 0..d.cells {
                            for w in 0..d.users {
                                let c = d.ut(m, w);
                                let e = powers[c] * un * x[(i, c)].norm_sqr();
                                if w == q && m != l {
                                    s.contamination[i] += e;
                                } else if w != q {
                                    s.interference[i] += e;
                                }
                            }
                        }
                    }
                }
            }
            Ok(s)
        })
        .collect();
    let mut total = Sums::new(lk);
    for p in parts {
        total.merge(&p?);
    }
    let tf = trials.max(1) as f64;
    let mean = |v: &[f64]| v.iter().map(|x| x / tf).collect::<Vec<_>>();

    let mut xi = Vec::with_capacity(lk);
    let mut dchk = Vec::with_capacity(lk);
    let mut useful_emp = Vec::with_capacity(lk);
    let mut cont = Vec::with_capacity(lk);
    let mut intf = Vec::with_capacity(lk);
    for l in 0..d.cells {
        for q in 0..d.users {
            let i = d.ut(l, q);
            let dv = 1.0 + eq.delta_own(l, q);
            xi.push(eq.xi_bar(l, q));
            dchk.push(eq.delta_check(l, q));
            useful_emp.push((total.useful[i] / tf).norm() * dv);
            let (mut c, mut f) = (0.0, 0.0);
            for m in 0..d.cells {
                for w in 0..d.users {
                    let g = powers[d.ut(m, w)] * eq.interference(l, q, m, w) / (dv * dv);
                    if w == q && m != l {
                        c += g;
                    } else if w != q {
                        f += g;
                    }
                }
            }
            cont.push(c);
            intf.push(f);
        }
    }
    Ok(OracleReport {
        antennas: d.antennas,
        trials,
        quantities: vec![
            OracleQuantity::new("xi", xi, mean(&total.norm)),
            OracleQuantity::new("delta_check", dchk.clone(), mean(&total.loo)),
            OracleQuantity::new("useful", dchk, useful_emp),
            OracleQuantity::new("contamination", cont, mean(&total.contamination)),
            OracleQuantity::new("interference", intf, mean(&total.interference)),
        ],
    })
}

/// Asymptotic uplink SINR next to its sample value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Check {
    /// Sample SINR with the full denominator, including the variance of the
    /// user's own effective gain.
    pub sinr: OracleQuantity,
    /// Sample SINR with that self-variance removed, which the asymptotic
    /// expression omits. Diagnostic only.
    pub sinr_without_self_variance: OracleQuantity,
}

/// Asymptotic against sample uplink SINR of MCA-RZF detectors at fixed powers.
pub fn theorem2_check(ctx: &DropContext, powers: &[f64], trials: usize, seed: u64) -> Result<Theorem2Check> {
    let model = AsymptoticModel::new(&ctx.cov, &ctx.stats);
    let eq = model.equilibrium(powers, FixedPointOptions::from_config(&ctx.config))?;
    let recipe = PrecoderRecipe::Mca { powers: powers.to_vec() };
    let stats = link_statistics(ctx, std::slice::from_ref(&recipe), trials, seed)?.remove(0);
    let asym = eq.ul_sinr();
    let reduced = (0..stats.users())
        .map(|i| {
            let useful = powers[i] * stats.mean_own[i].norm_sqr();
            let total: f64 = stats.second.row(i).iter().zip(powers).map(|(s, q)| s * q).sum();
            useful / (total - powers[i] * stats.second[(i, i)] + 1.0)
        })
        .collect();
    Ok(Theorem2Check {
        sinr: OracleQuantity::new("ul_sinr", asym.clone(), stats.ul_sinr(powers)),
        sinr_without_self_variance: OracleQuantity::new("ul_sinr_without_self_variance", asym, reduced),
    })
}

/// End-to-end duality check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityCheck {
    pub ul_powers: Vec<f64>,
    pub dl_powers: Vec<f64>,
    /// Target uplink SINR next to the downlink SINR achieved on independent
    /// draws.
    pub sinr: OracleQuantity,
    pub sum_power_rel_error: f64,
}

/// Uplink SINR and duality operands from draws under `seed_design`; downlink
/// SINR at the resulting powers measured on draws under `seed_check`.
pub fn duality_check(ctx: &DropContext, ul_powers: &[f64], trials: usize, seed_design: u64, seed_check: u64) -> Result<DualityCheck> {
    let recipe = PrecoderRecipe::Mca { powers: ul_powers.to_vec() };
    let design = link_statistics(ctx, std::slice::from_ref(&recipe), trials, seed_design)?.remove(0);
    let target = design.ul_sinr(ul_powers);
    let p = dl_powers(&duality_operands_empirical(&design, &target))?;
    let check = link_statistics(ctx, std::slice::from_ref(&recipe), trials, seed_check)?.remove(0);
    let achieved = check.dl_sinr(&p);
    let sp: f64 = p.iter().sum();
    let su: f64 = ul_powers.iter().sum();
    Ok(DualityCheck {
        ul_powers: ul_powers.to_vec(),
        dl_powers: p,
        sinr: OracleQuantity::new("dl_sinr", target, achieved),
        sum_power_rel_error: (sp - su).abs() / su,
    })
}

/// Deterministic downlink powers against their sample counterpart.
///
/// Both maps use the same targets: the asymptotic SINRs of the max-min
/// powers. Only the duality operands differ.
pub fn theorem3_check(ctx: &DropContext, trials: usize, seed: u64) -> Result<OracleQuantity> {
    let design = asymptotic_maxmin(ctx)?;
    let sol = &design.solution;
    let recipe = PrecoderRecipe::Mca { powers: sol.ul_powers.clone() };
    let stats = link_statistics(ctx, std::slice::from_ref(&recipe), trials, seed)?.remove(0);
    let emp = dl_powers(&duality_operands_empirical(&stats, &sol.ul_sinr))?;
    let asym = dl_powers(&duality_operands_asymptotic(&design.equilibrium, &sol.ul_sinr))?;
    Ok(OracleQuantity::new("dl_powers", asym, emp))
}
