//! MCA-RZF and conventional RZF precoding vectors.

use rayon::prelude::*;

use crate::channel::{EstimateSet, EstimationStats};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, gemm, CMat, CVec, Op, C64, ONE};
use crate::scenario::Dims;

const SOLVE_RESIDUAL_LIMIT: f64 = 1e-8;

/// Unit-norm precoders per cell (`N x K`) and the squared norms of the
/// unnormalized vectors.
#[derive(Clone, Debug)]
pub struct PrecoderSet {
    pub v: Vec<CMat>,
    /// `||u_jk||^2` in [`Dims::ut`] order.
    pub u_norm_sq: Vec<f64>,
}

impl PrecoderSet {
    pub fn column(&self, j: usize, k: usize) -> CVec {
        self.v[j].column(k).into_owned()
    }
}

/// `I + sum_{l,q} p_lq Delta_jlq` for every cell `j`.
pub fn mca_regularizers(stats: &EstimationStats, ul_powers: &[f64]) -> Vec<CMat> {
    let dims = stats.dims();
    (0..dims.cells)
        .into_par_iter()
        .map(|j| {
            let n = dims.antennas;
            let mut m = CMat::identity(n, n);
            for (d, &p) in stats.delta_at(j).iter().zip(ul_powers) {
                if p != 0.0 {
                    m.zip_apply(d, |a, b| *a += b * p);
                }
            }
            m
        })
        .collect()
}

fn check_powers(dims: Dims, ul_powers: &[f64]) -> Result<()> {
    if ul_powers.len() != dims.lk() {
        return Err(Error::Dimension { context: "uplink powers", expected: dims.lk(), got: ul_powers.len() });
    }
    if let Some(i) = ul_powers.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::Config(vec![format!("uplink power {i} is {}", ul_powers[i])]));
    }
    Ok(())
}

/// Solve `m u = b` columnwise, then normalize.
fn normalized_solve(m: CMat, b: CMat, context: &'static str) -> Result<(CMat, Vec<f64>)> {
    let chol = cholesky(m.clone(), context)?;
    let u = chol.solve(&b);
    let mut res = b.clone();
    gemm(ONE, &m, Op::N, &u, Op::N, -ONE, &mut res);
    let scale = b.norm().max(f64::MIN_POSITIVE);
    let residual = res.norm() / scale;
    if !(residual <= SOLVE_RESIDUAL_LIMIT) {
        return Err(Error::Residual { context, residual, limit: SOLVE_RESIDUAL_LIMIT });
    }
    let mut v = u;
    let mut xi = Vec::with_capacity(v.ncols());
    for mut col in v.column_iter_mut() {
        let nsq = col.norm_squared();
        if !(nsq > 0.0) {
            return Err(Error::Singular("zero serving-cell estimate"));
        }
        col.unscale_mut(nsq.sqrt());
        xi.push(nsq);
    }
    Ok((v, xi))
}

/// MCA-RZF with a precomputed regularizer from [`mca_regularizers`].
pub fn mca_rzf_with(est: &EstimateSet, ul_powers: &[f64], regularizers: &[CMat]) -> Result<PrecoderSet> {
    let dims = est.dims();
    check_powers(dims, ul_powers)?;
    let cells: Vec<Result<(CMat, Vec<f64>)>> = (0..dims.cells)
        .into_par_iter()
        .map(|j| {
            let gh = &est.ghat[j];
            let mut scaled = gh.clone();
            for (mut col, &p) in scaled.column_iter_mut().zip(ul_powers) {
                col.scale_mut(p);
            }
            let mut m = regularizers[j].clone();
            gemm(ONE, &scaled, Op::N, gh, Op::H, ONE, &mut m);
            let b = gh.columns(dims.ut(j, 0), dims.users).into_owned();
            normalized_solve(m, b, "MCA-RZF system")
        })
        .collect();
    collect(cells)
}

/// MCA-RZF: `u_jk = (sum_{l,q} p_lq (g_hat_jlq g_hat_jlq^H + Delta_jlq) + I)^-1 g_hat_jjk`.
pub fn mca_rzf_vectors(est: &EstimateSet, ul_powers: &[f64]) -> Result<PrecoderSet> {
    check_powers(est.dims(), ul_powers)?;
    let reg = mca_regularizers(&est.stats, ul_powers);
    mca_rzf_with(est, ul_powers, &reg)
}

/// Single-cell RZF: columns of `(G_ll G_ll^H + N alpha I)^-1 G_ll`.
pub fn conventional_rzf_vectors(est: &EstimateSet, alpha: f64) -> Result<PrecoderSet> {
    let dims = est.dims();
    let n = dims.antennas;
    let cells: Vec<Result<(CMat, Vec<f64>)>> = (0..dims.cells)
        .into_par_iter()
        .map(|l| {
            let g = est.ghat[l].columns(dims.ut(l, 0), dims.users).into_owned();
            let mut m = CMat::identity(n, n) * C64::from(n as f64 * alpha);
            gemm(ONE, &g, Op::N, &g, Op::H, ONE, &mut m);
            normalized_solve(m, g, "RZF system")
        })
        .collect();
    collect(cells)
}

fn collect(cells: Vec<Result<(CMat, Vec<f64>)>>) -> Result<PrecoderSet> {
    let mut v = Vec::with_capacity(cells.len());
    let mut u_norm_sq = Vec::new();
    for c in cells {
        let (vj, xi) = c?;
        v.push(vj);
        u_norm_sq.extend(xi);
    }
    Ok(PrecoderSet { v, u_norm_sq })
}

/// Uplink SINR of detector `v` for user `(j, k)` when the estimation error is
/// treated as uncorrelated noise with covariance `Delta`.
pub fn rayleigh_sinr(est: &EstimateSet, ul_powers: &[f64], j: usize, k: usize, v: &CVec) -> f64 {
    let dims = est.dims();
    let own = dims.ut(j, k);
    let gh = &est.ghat[j];
    let signal = ul_powers[own] * v.dotc(&gh.column(own)).norm_sqr();
    let mut denom = v.norm_squared();
    for i in 0..dims.lk() {
        let p = ul_powers[i];
        if i != own {
            denom += p * v.dotc(&gh.column(i)).norm_sqr();
        }
        let d = &est.stats.delta_at(j)[i];
        denom += p * (v.adjoint() * d * v)[(0, 0)].re;
    }
    signal / denom
}
