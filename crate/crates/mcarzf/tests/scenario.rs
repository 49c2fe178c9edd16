mod common;

use std::f64::consts::PI;

use approx::assert_relative_eq;
use mcarzf::linalg::{hermitian_residual, mul, Op, C64};
use mcarzf::scenario::{build_covariances, drop_users, hex_sites, steering_matrix, Dims, Geometry, SystemConfig};
use proptest::prelude::*;

fn small_config(cells: usize, users: usize, antennas: usize) -> SystemConfig {
    SystemConfig { cells, users, antennas, ..Default::default() }
}

fn in_hexagon(g: &Geometry, j: usize, k: usize) -> bool {
    let b = g.bs_positions[j];
    let u = g.ut_positions[j * g.users + k];
    let (x, y) = (u[0] - b[0], u[1] - b[1]);
    let s3 = 3f64.sqrt();
    y.abs() <= s3 / 2.0 + 1e-12 && s3 * x.abs() + y.abs() <= s3 + 1e-12
}

#[test]
fn single_cell_distances_in_range() {
    let g = drop_users(&small_config(1, 50, 4), 11).unwrap();
    assert_eq!(g.bs_positions, vec![[0.0, 0.0]]);
    for k in 0..50 {
        let d = g.distance(0, 0, k);
        assert!((0.2..=1.0).contains(&d), "distance {d}");
    }
}

#[test]
fn seven_cells_neighbours_at_root_three() {
    let s = hex_sites(7);
    assert_eq!(s.len(), 7);
    assert_eq!(s[0], [0.0, 0.0]);
    for p in &s[1..] {
        assert_relative_eq!(p[0].hypot(p[1]), 3f64.sqrt(), epsilon = 1e-12);
    }
}

#[test]
fn drop_is_deterministic() {
    let c = small_config(7, 5, 4);
    assert_eq!(drop_users(&c, 3).unwrap(), drop_users(&c, 3).unwrap());
    assert_ne!(drop_users(&c, 3).unwrap(), drop_users(&c, 4).unwrap());
}

#[test]
fn degenerate_exclusion_radius_rejected() {
    let c = SystemConfig { min_ut_distance: 1.0, ..small_config(1, 1, 1) };
    assert!(drop_users(&c, 0).is_err());
}

#[test]
fn scalar_unit_distance_covariance_is_one() {
    let c = small_config(1, 1, 1);
    let g = Geometry { bs_positions: vec![[0.0, 0.0]], ut_positions: vec![[1.0, 0.0]], ut_azimuth: vec![0.3], users: 1 };
    let cov = build_covariances(&g, &c).unwrap();
    assert_relative_eq!(cov.r(0, 0, 0)[(0, 0)].re, 1.0, epsilon = 1e-15);
    assert_relative_eq!(cov.r(0, 0, 0)[(0, 0)].im, 0.0, epsilon = 1e-15);
}

#[test]
fn n4_covariance_matches_direct_summation() {
    let (n, omega, lambda) = (4usize, 0.5, 0.37);
    let a = steering_matrix(n, omega, 0.0);
    let r = mul(&a, Op::N, &a, Op::H) * C64::from(lambda);
    for row in 0..n {
        for col in 0..n {
            let mut want = C64::new(0.0, 0.0);
            for p in 0..n {
                let phi = -PI / 2.0 + PI * p as f64 / n as f64;
                let ar = C64::from_polar(1.0, -2.0 * PI * omega * row as f64 * phi.sin());
                let ac = C64::from_polar(1.0, -2.0 * PI * omega * col as f64 * phi.sin());
                want += ar * ac.conj() / n as f64;
            }
            want *= lambda;
            assert!((r[(row, col)] - want).norm() < 1e-14, "entry ({row},{col})");
        }
    }
}

#[test]
fn pathloss_decreases_with_distance() {
    let c = small_config(1, 2, 8);
    let g = Geometry {
        bs_positions: vec![[0.0, 0.0]],
        ut_positions: vec![[0.3, 0.1], [0.6, 0.2]],
        ut_azimuth: vec![1.0, 1.0],
        users: 2,
    };
    let cov = build_covariances(&g, &c).unwrap();
    assert!(cov.r(0, 0, 0).trace().re > cov.r(0, 0, 1).trace().re);
}

#[test]
fn external_covariances_get_valid_roots() {
    let dims = Dims { cells: 2, users: 2, antennas: 6 };
    let cov = common::random_covariances(dims, 0.2, 5);
    for (r, s) in cov.all().iter().zip(cov.all_sqrt()) {
        assert!(common::rel_frob(&mul(s, Op::N, s, Op::H), r) < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn covariance_invariants(
        cells in 1usize..=7,
        users in 1usize..=3,
        antennas in 1usize..=12,
        omega in 0.1f64..1.0,
        beta in 2.0f64..4.5,
        seed in any::<u64>(),
    ) {
        let c = SystemConfig { cells, users, antennas, omega, pathloss_exponent: beta, ..Default::default() };
        let g = drop_users(&c, seed).unwrap();
        for j in 0..cells {
            for k in 0..users {
                prop_assert!(in_hexagon(&g, j, k));
                prop_assert!(g.distance(j, j, k) >= c.min_ut_distance);
            }
        }
        let cov = build_covariances(&g, &c).unwrap();
        for l in 0..cells {
            for j in 0..cells {
                for k in 0..users {
                    let r = cov.r(l, j, k);
                    prop_assert!(hermitian_residual(r) <= 1e-12);
                    let (lo, hi) = common::min_max_eig(r);
                    prop_assert!(lo >= -1e-10 * hi);
                    let lambda = g.distance(l, j, k).powf(-beta);
                    let tr = r.trace().re;
                    prop_assert!((tr - antennas as f64 * lambda).abs() <= 1e-9 * antennas as f64 * lambda);
                    let s = cov.sqrt(l, j, k);
                    prop_assert!(common::rel_frob(&mul(s, Op::N, s, Op::H), r) <= 1e-10);
                }
            }
        }
    }
}
