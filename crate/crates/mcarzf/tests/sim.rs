mod common;

use mcarzf::linalg::{RMat, C64};
use mcarzf::power::LinkStatistics;
use mcarzf::rmt::{AsymptoticModel, FixedPointOptions};
use mcarzf::scenario::{two_level_covariances, CovarianceSet, Dims};
use mcarzf::sim::oracle::appendix_b_oracle;
use mcarzf::sim::{empirical_dl_sinr, link_statistics, run_experiment, DropContext, PrecoderRecipe, SchemeId, Sweep};
use mcarzf::SystemConfig;

fn context(dims: Dims, rho: f64, cov: CovarianceSet) -> DropContext {
    let cfg = SystemConfig {
        cells: dims.cells,
        users: dims.users,
        antennas: dims.antennas,
        rho_dl: rho,
        rho_tr: rho,
        ..Default::default()
    };
    DropContext::from_covariances(&cfg, cov).unwrap()
}

fn small_context(antennas: usize, seed: u64) -> DropContext {
    let dims = Dims { cells: 2, users: 2, antennas };
    context(dims, 10.0, two_level_covariances(dims, 1.0, 0.1, 0.5, seed).unwrap())
}

#[test]
fn zero_powers_give_zero_sinr() {
    let ctx = small_context(8, 1);
    let s = empirical_dl_sinr(&ctx, &PrecoderRecipe::Rzf { alpha: 0.1 }, &[0.0; 4], 16, 2).unwrap();
    assert!(s.iter().all(|&x| x == 0.0));
}

#[test]
fn deterministic_unit_link_gives_power_as_sinr() {
    let stats = LinkStatistics { mean_own: vec![C64::new(1.0, 0.0)], second: RMat::from_element(1, 1, 1.0), trials: 1 };
    assert_eq!(stats.dl_sinr(&[7.5]), vec![7.5]);
    assert_eq!(stats.ul_sinr(&[7.5]), vec![7.5]);
}

/// Batch SINR estimates of one recipe: `batches` runs of `size` trials each.
fn batch_sinr(ctx: &DropContext, recipe: &PrecoderRecipe, p: &[f64], batches: usize, size: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..batches)
        .map(|b| link_statistics(ctx, std::slice::from_ref(recipe), size, seed + b as u64).unwrap()[0].dl_sinr(p))
        .collect()
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

#[test]
fn half_samples_agree_within_two_standard_errors() {
    let ctx = small_context(16, 3);
    let recipe = PrecoderRecipe::Mca { powers: vec![10.0; 4] };
    let p = [10.0; 4];
    let half = 2000;
    let a = link_statistics(&ctx, std::slice::from_ref(&recipe), half, 1000).unwrap()[0].dl_sinr(&p);
    let b = link_statistics(&ctx, std::slice::from_ref(&recipe), half, 2000).unwrap()[0].dl_sinr(&p);
    // Standard error of a half-sample estimate from the spread of 20 batches.
    let batches = batch_sinr(&ctx, &recipe, &p, 20, half / 20, 3000);
    for i in 0..4 {
        let col: Vec<f64> = batches.iter().map(|s| s[i]).collect();
        let (_, sd) = mean_std(&col);
        let se_half = sd / 20f64.sqrt();
        let se_diff = se_half * 2f64.sqrt();
        assert!((a[i] - b[i]).abs() <= 2.0 * se_diff, "user {i}: {} vs {} (se {se_diff})", a[i], b[i]);
    }
}

#[test]
fn more_trials_shrink_disagreement() {
    let ctx = small_context(16, 4);
    let recipe = PrecoderRecipe::Rzf { alpha: 0.05 };
    let p = [10.0; 4];
    let disagreement = |size: usize, base: u64| {
        let mut total = 0.0;
        for r in 0..20u64 {
            let x = link_statistics(&ctx, std::slice::from_ref(&recipe), size, base + 2 * r).unwrap()[0].dl_sinr(&p);
            let y = link_statistics(&ctx, std::slice::from_ref(&recipe), size, base + 2 * r + 1).unwrap()[0].dl_sinr(&p);
            total += x.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum::<f64>();
        }
        total
    };
    let small = disagreement(100, 10);
    let large = disagreement(200, 500);
    assert!(large < small, "{large} !< {small}");
}

/// Weak pilot contamination: the same-pilot term is dominated by the
/// incoherent part at these sizes, so convergence there is slow.
fn oracle_errors(antennas: usize, trials: usize) -> Vec<(String, f64)> {
    let dims = Dims { cells: 2, users: 3, antennas };
    let ctx = context(dims, 10.0, two_level_covariances(dims, 1.0, 0.01, 0.5, 21).unwrap());
    let p = vec![10.0, 7.0, 4.0, 9.0, 6.0, 5.0];
    let eq = AsymptoticModel::new(&ctx.cov, &ctx.stats).equilibrium(&p, FixedPointOptions::default()).unwrap();
    let report = appendix_b_oracle(&ctx, &p, &eq, trials, 77).unwrap();
    report.quantities.iter().map(|q| (q.name.clone(), q.max_rel_error())).collect()
}

#[test]
fn resolvent_quantities_match_at_n32() {
    for (name, err) in oracle_errors(32, 1000) {
        if name == "delta_check" || name == "xi" {
            assert!(err <= 0.10, "{name}: {err}");
        }
    }
}

#[test]
fn oracle_errors_shrink_with_antennas() {
    let small = oracle_errors(32, 4000);
    let large = oracle_errors(128, 4000);
    for ((name, a), (_, b)) in small.iter().zip(&large) {
        assert!(b < a, "{name}: N=128 {b} !< N=32 {a}");
    }
}

#[test]
fn zero_power_oracle_is_exact_in_expectation() {
    let dims = Dims { cells: 2, users: 2, antennas: 16 };
    let ctx = context(dims, 10.0, two_level_covariances(dims, 1.0, 0.1, 0.5, 5).unwrap());
    let p = vec![0.0; 4];
    let eq = AsymptoticModel::new(&ctx.cov, &ctx.stats).equilibrium(&p, FixedPointOptions::default()).unwrap();
    for l in 0..2 {
        for q in 0..2 {
            let tr = ctx.stats.psi(l, l, q).trace().re;
            assert!((eq.xi_bar(l, q) - tr).abs() <= 1e-10 * tr);
        }
    }
    let report = appendix_b_oracle(&ctx, &p, &eq, 4000, 6).unwrap();
    assert!(report.get("xi").unwrap().max_rel_error() <= 0.05);
}

fn tiny_config() -> SystemConfig {
    SystemConfig { cells: 2, users: 2, antennas: 8, n_drops: 2, mc_trials: 16, ..Default::default() }
}

#[test]
fn smoke_run_emits_every_scheme() {
    let cfg = SystemConfig { n_drops: 1, mc_trials: 1, ..tiny_config() };
    let mut calls = 0;
    let res = run_experiment(&cfg, &Sweep::Snr(vec![10.0]), &SchemeId::ALL, &mut |_| calls += 1).unwrap();
    assert_eq!(calls, 1);
    assert_eq!(res.points.len(), 1);
    assert_eq!(res.points[0].schemes.len(), 4);
}

#[test]
fn runs_are_reproducible_across_thread_counts() {
    let cfg = tiny_config();
    let sweep = Sweep::Antennas(vec![4, 8]);
    let mut a = run_experiment(&SystemConfig { threads: 1, ..cfg.clone() }, &sweep, &SchemeId::ALL, &mut |_| {}).unwrap();
    let mut b = run_experiment(&SystemConfig { threads: 3, ..cfg.clone() }, &sweep, &SchemeId::ALL, &mut |_| {}).unwrap();
    a.wall_time_s = 0.0;
    b.wall_time_s = 0.0;
    for p in a.points.iter_mut().chain(b.points.iter_mut()) {
        p.config.threads = 0;
    }
    assert_eq!(a, b);
    for p in &a.points {
        for s in &p.schemes {
            assert!(!s.failed(), "{} failed: {:?}", s.scheme, s.drops[0].error);
        }
    }
}

#[test]
fn drops_are_shared_across_sweep_points() {
    let cfg = tiny_config();
    let res = run_experiment(&cfg, &Sweep::Snr(vec![0.0, 10.0]), &[SchemeId::RzfUniform], &mut |_| {}).unwrap();
    let seeds = |i: usize| res.points[i].schemes[0].drops.iter().map(|d| d.seed).collect::<Vec<_>>();
    assert_eq!(seeds(0), seeds(1));
}
