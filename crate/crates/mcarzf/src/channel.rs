//! Correlated channel draws and LMMSE estimation under pilot contamination.
//!
//! User `k` of every cell transmits the same pilot, so BS `l` observes
//! `y_lk = sum_m g_lmk + z_lk / sqrt(rho_tr)` once and estimates every
//! `g_ljk` from that single observation.

use std::sync::Arc;

use nalgebra::DVectorView;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::linalg::{cn01, gemm, herm_inverse, hermitize, matvec, mul, CMat, Op, C64, ZERO};
use crate::scenario::{CovarianceSet, Dims};

/// Deterministic LMMSE operators `Omega`, `Psi = Omega R`, `Delta = R - Psi`,
/// all in flat link order.
#[derive(Clone, Debug)]
pub struct EstimationStats {
    dims: Dims,
    rho_tr: f64,
    omega: Vec<CMat>,
    psi: Vec<CMat>,
    delta: Vec<CMat>,
}

impl EstimationStats {
    pub fn new(cov: &CovarianceSet, rho_tr: f64) -> Result<Self> {
        let dims = cov.dims();
        let n = dims.antennas;
        let per_lk: Vec<Result<Vec<(CMat, CMat, CMat)>>> = (0..dims.cells * dims.users)
            .into_par_iter()
            .map(|lk| {
                let (l, k) = (lk / dims.users, lk % dims.users);
                let mut s = CMat::identity(n, n) / C64::from(rho_tr);
                for m in 0..dims.cells {
                    s += cov.r(l, m, k);
                }
                let s_inv = herm_inverse(s, "pilot observation covariance")?;
                Ok((0..dims.cells)
                    .map(|j| {
                        let r = cov.r(l, j, k);
                        let omega = mul(r, Op::N, &s_inv, Op::N);
                        let mut psi = mul(&omega, Op::N, r, Op::N);
                        hermitize(&mut psi);
                        let mut delta = r - &psi;
                        hermitize(&mut delta);
                        (omega, psi, delta)
                    })
                    .collect())
            })
            .collect();
        let mut omega = vec![CMat::zeros(0, 0); dims.links()];
        let mut psi = omega.clone();
        let mut delta = omega.clone();
        for (lk, item) in per_lk.into_iter().enumerate() {
            let (l, k) = (lk / dims.users, lk % dims.users);
            for (j, (o, p, d)) in item?.into_iter().enumerate() {
                let i = dims.link(l, j, k);
                omega[i] = o;
                psi[i] = p;
                delta[i] = d;
            }
        }
        Ok(Self { dims, rho_tr, omega, psi, delta })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn rho_tr(&self) -> f64 {
        self.rho_tr
    }

    pub fn omega(&self, l: usize, j: usize, k: usize) -> &CMat {
        &self.omega[self.dims.link(l, j, k)]
    }

    /// Covariance of the estimate `g_hat_ljk`.
    pub fn psi(&self, l: usize, j: usize, k: usize) -> &CMat {
        &self.psi[self.dims.link(l, j, k)]
    }

    /// Covariance of the estimation error `g_ljk - g_hat_ljk`.
    pub fn delta(&self, l: usize, j: usize, k: usize) -> &CMat {
        &self.delta[self.dims.link(l, j, k)]
    }

    /// `Psi_lmw` for all `(m, w)` seen from BS `l`, in user order.
    pub fn psi_at(&self, l: usize) -> &[CMat] {
        let lk = self.dims.lk();
        &self.psi[l * lk..(l + 1) * lk]
    }

    pub fn delta_at(&self, l: usize) -> &[CMat] {
        let lk = self.dims.lk();
        &self.delta[l * lk..(l + 1) * lk]
    }

    pub fn omega_at(&self, l: usize) -> &[CMat] {
        let lk = self.dims.lk();
        &self.omega[l * lk..(l + 1) * lk]
    }
}

/// One channel realization. Matrix `l` holds the channels seen by BS `l`,
/// one column per user in [`Dims::ut`] order.
#[derive(Clone, Debug)]
pub struct ChannelSet {
    dims: Dims,
    pub g: Vec<CMat>,
    pub h: Vec<CMat>,
}

impl ChannelSet {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn g(&self, l: usize, j: usize, k: usize) -> DVectorView<'_, C64> {
        self.g[l].column(self.dims.ut(j, k))
    }

    pub fn h(&self, l: usize, j: usize, k: usize) -> DVectorView<'_, C64> {
        self.h[l].column(self.dims.ut(j, k))
    }
}

/// Channel estimates of one realization plus the estimation operators.
#[derive(Clone, Debug)]
pub struct EstimateSet {
    dims: Dims,
    /// Per BS `l`, the estimates `g_hat_ljk` in user order.
    pub ghat: Vec<CMat>,
    /// Per BS `l`, the pilot observations `y_lk` (`N x K`).
    pub observation: Vec<CMat>,
    pub stats: Arc<EstimationStats>,
}

impl EstimateSet {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn ghat(&self, l: usize, j: usize, k: usize) -> DVectorView<'_, C64> {
        self.ghat[l].column(self.dims.ut(j, k))
    }
}

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    // Column-major fill keeps the draw order independent of nalgebra internals.
    let mut m = CMat::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            m[(r, c)] = cn01(rng);
        }
    }
    m
}

/// Draw `g_ljk = sqrt(R_ljk) h_ljk` for every link from `rng`.
pub fn draw_channels_with<R: Rng + ?Sized>(cov: &CovarianceSet, rng: &mut R) -> ChannelSet {
    let dims = cov.dims();
    let n = dims.antennas;
    let mut g = Vec::with_capacity(dims.cells);
    let mut h = Vec::with_capacity(dims.cells);
    for l in 0..dims.cells {
        let hl = gaussian_matrix(n, dims.lk(), rng);
        let mut gl = CMat::zeros(n, dims.lk());
        for j in 0..dims.cells {
            for k in 0..dims.users {
                let c = dims.ut(j, k);
                let (x, mut y) = (hl.column(c), gl.column_mut(c));
                matvec(cov.sqrt(l, j, k), x.as_slice(), y.as_mut_slice());
            }
        }
        g.push(gl);
        h.push(hl);
    }
    ChannelSet { dims, g, h }
}

pub fn draw_channels(cov: &CovarianceSet, seed: u64) -> ChannelSet {
    draw_channels_with(cov, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// LMMSE estimates from one pilot observation per `(l, k)`.
pub fn estimate_channels_with<R: Rng + ?Sized>(
    channels: &ChannelSet,
    stats: &Arc<EstimationStats>,
    rng: &mut R,
) -> EstimateSet {
    let dims = channels.dims;
    let n = dims.antennas;
    let noise_scale = C64::from(1.0 / stats.rho_tr.sqrt());
    let mut ghat = Vec::with_capacity(dims.cells);
    let mut observation = Vec::with_capacity(dims.cells);
    for l in 0..dims.cells {
        let mut y = gaussian_matrix(n, dims.users, rng) * noise_scale;
        for m in 0..dims.cells {
            let block = channels.g[l].columns(dims.ut(m, 0), dims.users);
            y += block;
        }
        let mut gh = CMat::zeros(n, dims.lk());
        for j in 0..dims.cells {
            for k in 0..dims.users {
                let mut col = gh.column_mut(dims.ut(j, k));
                matvec(stats.omega(l, j, k), y.column(k).as_slice(), col.as_mut_slice());
            }
        }
        ghat.push(gh);
        observation.push(y);
    }
    EstimateSet { dims, ghat, observation, stats: Arc::clone(stats) }
}

/// Build the estimation operators from `cov` and estimate `channels`.
pub fn estimate_channels(channels: &ChannelSet, cov: &CovarianceSet, rho_tr: f64, seed: u64) -> Result<EstimateSet> {
    let stats = Arc::new(EstimationStats::new(cov, rho_tr)?);
    Ok(estimate_channels_with(channels, &stats, &mut ChaCha8Rng::seed_from_u64(seed)))
}

/// Sample covariance helper used by statistical checks: `sum_t x_t x_t^H / T`.
pub fn sample_covariance(samples: &CMat) -> CMat {
    let t = samples.ncols().max(1) as f64;
    let mut c = CMat::zeros(samples.nrows(), samples.nrows());
    gemm(C64::from(1.0 / t), samples, Op::N, samples, Op::H, ZERO, &mut c);
    c
}
