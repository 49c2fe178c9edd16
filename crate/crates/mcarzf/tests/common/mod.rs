#![allow(dead_code)]

use mcarzf::linalg::{cn01, CMat, C64};
use mcarzf::scenario::{CovarianceSet, Dims};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> CMat {
    let mut r = rng(seed);
    CMat::from_fn(rows, cols, |_, _| cn01(&mut r))
}

/// Random full-rank covariance with trace `n * scale`.
pub fn random_psd(n: usize, scale: f64, seed: u64) -> CMat {
    let a = random_matrix(n, n, seed);
    let mut r = &a * a.adjoint() + CMat::identity(n, n) * C64::from(0.1);
    let tr = r.trace().re;
    r *= C64::from(scale * n as f64 / tr);
    r
}

/// Random covariance set with serving-link pathloss 1 and cross links `cross`.
pub fn random_covariances(dims: Dims, cross: f64, seed: u64) -> CovarianceSet {
    let mut r = Vec::with_capacity(dims.links());
    for l in 0..dims.cells {
        for j in 0..dims.cells {
            for k in 0..dims.users {
                let s = if l == j { 1.0 } else { cross };
                r.push(random_psd(dims.antennas, s, seed.wrapping_mul(1000).wrapping_add(dims.link(l, j, k) as u64)));
            }
        }
    }
    CovarianceSet::from_covariances(dims.cells, dims.users, r).unwrap()
}

pub fn rel_frob(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

pub fn min_max_eig(m: &CMat) -> (f64, f64) {
    let e = mcarzf::linalg::herm_eigenvalues(m);
    let lo = e.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}
