mod common;

use std::sync::Arc;

use mcarzf::channel::{draw_channels, draw_channels_with, estimate_channels, estimate_channels_with, sample_covariance, EstimationStats};
use mcarzf::linalg::{hermitian_residual, mul, CMat, Op, C64};
use mcarzf::scenario::{CovarianceSet, Dims};
use proptest::prelude::*;

fn identity_set(n: usize) -> CovarianceSet {
    CovarianceSet::from_covariances(1, 1, vec![CMat::identity(n, n)]).unwrap()
}

#[test]
fn structural_identities() {
    let dims = Dims { cells: 2, users: 3, antennas: 5 };
    let cov = common::random_covariances(dims, 0.3, 1);
    let ch = draw_channels(&cov, 9);
    let est = estimate_channels(&ch, &cov, 2.0, 10).unwrap();
    let stats = &est.stats;
    for l in 0..2 {
        for j in 0..2 {
            for k in 0..3 {
                let want = cov.sqrt(l, j, k) * ch.h(l, j, k);
                assert!((ch.g(l, j, k) - &want).norm() <= 1e-13 * want.norm());
                // One pilot observation per (l, k) serves every j.
                let y = est.observation[l].column(k);
                let ghat = stats.omega(l, j, k) * y;
                assert!((est.ghat(l, j, k) - &ghat).norm() <= 1e-13 * ghat.norm());
                let delta = cov.r(l, j, k) - stats.psi(l, j, k);
                assert_eq!(&delta, stats.delta(l, j, k));
            }
        }
    }
}

#[test]
fn unit_covariance_average_norm() {
    let n = 4;
    let cov = identity_set(n);
    let mut rng = common::rng(2);
    let trials = 10_000;
    let samples: Vec<f64> = (0..trials).map(|_| draw_channels_with(&cov, &mut rng).g[0].norm_squared() / n as f64).collect();
    let mean = samples.iter().sum::<f64>() / trials as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
    let se = (var / trials as f64).sqrt();
    assert!((mean - 1.0).abs() <= 3.0 * se, "mean {mean} se {se}");
}

#[test]
fn sample_covariance_converges() {
    let n = 4;
    let r = common::random_psd(n, 1.0, 3);
    let cov = CovarianceSet::from_covariances(1, 1, vec![r.clone()]).unwrap();
    let trials = 100_000;
    let mut rng = common::rng(4);
    let mut samples = CMat::zeros(n, trials);
    for t in 0..trials {
        samples.set_column(t, &draw_channels_with(&cov, &mut rng).g[0].column(0));
    }
    let s = sample_covariance(&samples);
    let scale = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for (a, b) in s.iter().zip(r.iter()) {
        assert!((a - b).norm() <= 0.05 * scale, "{a} vs {b}");
    }
}

#[test]
fn high_training_snr_recovers_channel() {
    let dims = Dims { cells: 1, users: 2, antennas: 6 };
    let cov = common::random_covariances(dims, 1.0, 7);
    for seed in 0..20 {
        let ch = draw_channels(&cov, seed);
        let est = estimate_channels(&ch, &cov, 1e6, seed + 100).unwrap();
        for k in 0..2 {
            let err = (est.ghat(0, 0, k) - ch.g(0, 0, k)).norm() / ch.g(0, 0, k).norm();
            assert!(err <= 1e-2, "relative error {err}");
        }
    }
}

#[test]
fn estimate_covariance_and_orthogonality() {
    let dims = Dims { cells: 2, users: 1, antennas: 8 };
    let cov = common::random_covariances(dims, 0.5, 12);
    let stats = Arc::new(EstimationStats::new(&cov, 5.0).unwrap());
    let trials = 100_000;
    let mut rng = common::rng(13);
    let mut ghat = CMat::zeros(8, trials);
    let mut err = CMat::zeros(8, trials);
    for t in 0..trials {
        let ch = draw_channels_with(&cov, &mut rng);
        let est = estimate_channels_with(&ch, &stats, &mut rng);
        ghat.set_column(t, &est.ghat(0, 1, 0));
        err.set_column(t, &(ch.g(0, 1, 0) - est.ghat(0, 1, 0)));
    }
    let psi = stats.psi(0, 1, 0);
    let scale = psi.norm();
    let s = sample_covariance(&ghat);
    assert!((&s - psi).norm() <= 0.05 * scale, "estimate covariance");
    let cross = mul(&ghat, Op::N, &err, Op::H) / C64::from(trials as f64);
    for z in cross.iter() {
        assert!(z.norm() <= 0.05 * scale, "cross-covariance entry {z}");
    }
}

#[test]
fn zero_power_links_give_zero_estimates() {
    let r = vec![CMat::zeros(3, 3)];
    let cov = CovarianceSet::from_covariances(1, 1, r).unwrap();
    let ch = draw_channels(&cov, 0);
    assert_eq!(ch.g[0].norm(), 0.0);
    let est = estimate_channels(&ch, &cov, 10.0, 1).unwrap();
    assert_eq!(est.ghat[0].norm(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn error_covariance_is_psd_and_below_r(
        cells in 1usize..=3,
        users in 1usize..=2,
        antennas in 1usize..=8,
        rho in 0.1f64..100.0,
        seed in any::<u64>(),
    ) {
        let dims = Dims { cells, users, antennas };
        let cov = common::random_covariances(dims, 0.4, seed);
        let stats = EstimationStats::new(&cov, rho).unwrap();
        for l in 0..cells {
            for j in 0..cells {
                for k in 0..users {
                    for m in [stats.psi(l, j, k), stats.delta(l, j, k)] {
                        prop_assert!(hermitian_residual(m) <= 1e-12);
                        let (lo, hi) = common::min_max_eig(m);
                        prop_assert!(lo >= -1e-10 * hi.max(1e-300));
                    }
                }
            }
        }
    }
}
