//! Exact-tolerance invariant checks on random small drops, run by `validate`.

use mcarzf::linalg::{herm_eigenvalues, hermitian_residual, CMat};
use mcarzf::power::{maxmin_ul_powers, MaxMinOptions, PowerSolution};
use mcarzf::precoder::{conventional_rzf_vectors, mca_rzf_vectors};
use mcarzf::rmt::{AsymptoticModel, FixedPointOptions};
use mcarzf::sim::{link_statistics, DropContext, PrecoderRecipe};
use mcarzf::{Result, SystemConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const COVARIANCE_TOL: f64 = 1e-9;
pub const PSD_TOL: f64 = 1e-9;
pub const UNIT_NORM_TOL: f64 = 1e-10;
pub const CAP_TOL: f64 = 1e-12;
pub const MONOTONE_TOL: f64 = 1e-9;
pub const EQUALIZATION_MAX: f64 = 1.05;
pub const FIXED_POINT_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub cases: usize,
    /// Largest observed violation measure; compared against `limit`.
    pub worst: f64,
    pub limit: f64,
    pub passed: bool,
    pub detail: Option<String>,
}

#[derive(Default)]
struct Tally {
    cases: usize,
    worst: f64,
    detail: Option<String>,
}

impl Tally {
    fn record(&mut self, value: f64, case: &str) {
        self.cases += 1;
        if value > self.worst || value.is_nan() {
            self.worst = value;
            self.detail = Some(case.to_string());
        }
    }

    fn finish(self, name: &'static str, limit: f64) -> CheckResult {
        let passed = self.worst <= limit;
        CheckResult { name, cases: self.cases, worst: self.worst, limit, passed, detail: self.detail }
    }
}

/// Smallest eigenvalue below zero, relative to the largest one.
fn psd_violation(m: &CMat) -> f64 {
    let e = herm_eigenvalues(m);
    let lo = e.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = e.iter().copied().fold(0.0, f64::max);
    if hi == 0.0 {
        (-lo).max(0.0)
    } else {
        (-lo / hi).max(0.0)
    }
}

fn random_config(rng: &mut ChaCha8Rng) -> SystemConfig {
    let rho_db: f64 = rng.random_range(-5.0..25.0);
    let rho = 10f64.powf(rho_db / 10.0);
    SystemConfig {
        cells: rng.random_range(1..=4),
        users: rng.random_range(1..=3),
        antennas: rng.random_range(2..=12),
        rho_dl: rho,
        rho_tr: rho,
        omega: rng.random_range(0.2..1.0),
        pathloss_exponent: rng.random_range(2.5..4.5),
        ..Default::default()
    }
}

fn algorithm_checks(sol: &PowerSolution, seen: &[Vec<f64>], cap: f64, case: &str, t: &mut [Tally; 3]) {
    for p in seen {
        let peak = p.iter().copied().fold(0.0, f64::max);
        t[0].record((peak - cap).abs() / cap, case);
    }
    let fall = sol.history.windows(2).map(|w| ((w[0] - w[1]) / w[0]).max(0.0)).fold(0.0, f64::max);
    t[1].record(fall, case);
    let lo = sol.ul_sinr.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sol.ul_sinr.iter().copied().fold(0.0, f64::max);
    t[2].record(if sol.converged { hi / lo } else { f64::INFINITY }, case);
}

fn run_maxmin<F>(users: usize, cap: f64, mut f: F) -> Result<(PowerSolution, Vec<Vec<f64>>)>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut seen = Vec::new();
    let opts = MaxMinOptions { cap, epsilon: 1e-6, max_iters: 1000 };
    let sol = maxmin_ul_powers(
        users,
        |p| {
            seen.push(p.to_vec());
            f(p)
        },
        opts,
    )?;
    Ok((sol, seen))
}

/// Run `cases` random drops and collect one result per invariant.
pub fn property_suite(cases: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cov_herm = Tally::default();
    let mut cov_psd = Tally::default();
    let mut trace = Tally::default();
    let mut err_psd = Tally::default();
    let mut unit = Tally::default();
    let mut fp = Tally::default();
    let mut lin: [Tally; 3] = Default::default();
    let mut asy: [Tally; 3] = Default::default();

    for case in 0..cases {
        let cfg = random_config(&mut rng);
        let drop_seed: u64 = rng.random();
        let label = format!("case {case}: L={} K={} N={} seed={drop_seed}", cfg.cells, cfg.users, cfg.antennas);
        let ctx = DropContext::generate(&cfg, drop_seed)?;
        let geo = ctx.geometry.as_ref().expect("generated drop has geometry");
        let n = cfg.antennas as f64;
        let dims = cfg.dims();

        for l in 0..cfg.cells {
            for j in 0..cfg.cells {
                for k in 0..cfg.users {
                    let r = ctx.cov.r(l, j, k);
                    cov_herm.record(hermitian_residual(r), &label);
                    cov_psd.record(psd_violation(r), &label);
                    let want = n * geo.distance(l, j, k).powf(-cfg.pathloss_exponent);
                    trace.record((r.trace().re - want).abs() / want, &label);
                    err_psd.record(psd_violation(ctx.stats.delta(l, j, k)), &label);
                }
            }
        }

        let p: Vec<f64> = (0..dims.lk()).map(|_| cfg.rho_dl * rng.random_range(0.05..1.0)).collect();
        let (_, est) = ctx.trial(drop_seed, 0);
        for set in [mca_rzf_vectors(&est, &p)?, conventional_rzf_vectors(&est, cfg.alpha())?] {
            for vj in &set.v {
                for col in vj.column_iter() {
                    unit.record((col.norm() - 1.0).abs(), &label);
                }
            }
        }

        let model = AsymptoticModel::new(&ctx.cov, &ctx.stats);
        let opts = FixedPointOptions::from_config(&cfg);
        let eq = model.equilibrium(&p, opts)?;
        for cell in &eq.cells {
            fp.record(cell.fp_residual, &label);
        }

        // The iteration itself is checked, so the SINR map is solved to
        // machine precision rather than the run tolerance.
        let exact = FixedPointOptions { tolerance: 1e-14, max_iters: 100_000 };
        let (sol, seen) = run_maxmin(dims.lk(), cfg.rho_dl, |q| Ok(model.equilibrium(q, exact)?.ul_sinr()))?;
        algorithm_checks(&sol, &seen, cfg.rho_dl, &label, &mut asy);
        // Fixed precoders make the SINR linear in the powers.
        let stats = link_statistics(&ctx, &[PrecoderRecipe::Mca { powers: p.clone() }], 16, drop_seed)?.remove(0);
        let (sol, seen) = run_maxmin(dims.lk(), cfg.rho_dl, |q| Ok(stats.ul_sinr(q)))?;
        algorithm_checks(&sol, &seen, cfg.rho_dl, &label, &mut lin);
    }

    let [lin_cap, lin_mono, lin_equal] = lin;
    let [asy_cap, asy_mono, asy_equal] = asy;
    Ok(vec![
        cov_herm.finish("covariance Hermitian", COVARIANCE_TOL),
        cov_psd.finish("covariance PSD", PSD_TOL),
        trace.finish("covariance trace equals N times pathloss", COVARIANCE_TOL),
        err_psd.finish("estimation error covariance PSD", PSD_TOL),
        unit.finish("precoder columns unit norm", UNIT_NORM_TOL),
        fp.finish("fixed-point residual", FIXED_POINT_TOL),
        lin_cap.finish("max-min cap per iteration, linear map", CAP_TOL),
        lin_mono.finish("max-min min-SINR decrease, linear map", MONOTONE_TOL),
        lin_equal.finish("max-min equalization ratio, linear map", EQUALIZATION_MAX),
        asy_cap.finish("max-min cap per iteration, asymptotic map", CAP_TOL),
        asy_mono.finish("max-min min-SINR decrease, asymptotic map", MONOTONE_TOL),
        asy_equal.finish("max-min equalization ratio, asymptotic map", EQUALIZATION_MAX),
    ])
}
