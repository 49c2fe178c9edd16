//! Deterministic equivalents of the MCA-RZF uplink SINR.
//!
//! For detector `u_lq = (N Lambda_l)^-1 g_hat_llq` with
//! `Lambda_l = (sum_k p_k (g_hat_k g_hat_k^H + Delta_k) + I) / N`, every
//! quadratic form entering the SINR is replaced by a trace functional of the
//! fixed point `T`:
//!
//! ```text
//! T       = (sum_k p_k Psi_k / (N (1 + delta_k)) + sum_k p_k Delta_k / N + I / N)^-1
//! delta_k = p_k tr(Psi_k T) / N
//! ```
//!
//! The index `k` runs over all `LK` users `(m, w)` seen from BS `l`, flattened
//! as `m K + w`. Second-order terms come from the derivative of `T` and
//! need the `LK x LK` system `(I - F) eps = f`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::channel::EstimationStats;
use crate::error::{Error, Result};
use crate::linalg::{
    as_real, dgemm, from_interleaved, herm_inverse, hermitize, mul, rows_dot, spectral_radius, swapped, CMat, Op, RMat,
    C64,
};
use crate::scenario::{CovarianceSet, Dims, SystemConfig};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPointOptions {
    pub tolerance: f64,
    pub max_iters: usize,
}

impl FixedPointOptions {
    pub fn from_config(c: &SystemConfig) -> Self {
        Self { tolerance: c.fp_tolerance, max_iters: c.fp_max_iters }
    }
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iters: 1000 }
    }
}

/// Square matrices of one size stored as interleaved rows, so that trace
/// products against many matrices become real GEMMs.
#[derive(Clone, Debug)]
pub struct MatrixStack {
    n: usize,
    rows: usize,
    data: Vec<f64>,
}

impl MatrixStack {
    pub fn new(mats: &[CMat]) -> Self {
        let n = mats.first().map_or(0, |m| m.nrows());
        let mut data = Vec::with_capacity(mats.len() * 2 * n * n);
        for m in mats {
            assert_eq!(m.shape(), (n, n), "stack of mixed sizes");
            data.extend_from_slice(as_real(m));
        }
        Self { n, rows: mats.len(), data }
    }

    fn width(&self) -> usize {
        2 * self.n * self.n
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.data[i * w..(i + 1) * w]
    }

    /// `sum_i coef_i M_i`, interleaved.
    fn combine(&self, coef: &[f64]) -> Vec<f64> {
        let w = self.width();
        let mut out = vec![0.0; w];
        dgemm(1, self.rows, w, 1.0, coef, (self.rows, 1), &self.data, (w, 1), 0.0, &mut out, (w, 1));
        out
    }

    /// `Re sum_ab M_i[a,b] conj(X[a,b])` for every row `i`, with `x` interleaved.
    fn dots(&self, x: &[f64]) -> Vec<f64> {
        let w = self.width();
        let mut out = vec![0.0; self.rows];
        dgemm(self.rows, w, 1, 1.0, &self.data, (w, 1), x, (1, w), 0.0, &mut out, (1, self.rows));
        out
    }
}

/// Solution of the coupled `(delta, T)` equations.
#[derive(Clone, Debug)]
pub struct FixedPoint {
    pub delta: Vec<f64>,
    pub t: CMat,
    pub iterations: usize,
    /// `max_k |g_k(delta) - delta_k| / |g_k(delta)|` at the returned point.
    pub residual: f64,
}

fn max_relative_change(new: &[f64], old: &[f64]) -> f64 {
    new.iter()
        .zip(old)
        .map(|(a, b)| {
            let d = (a - b).abs();
            if d == 0.0 {
                0.0
            } else {
                d / a.abs().max(b.abs())
            }
        })
        .fold(0.0, f64::max)
}

fn resolvent(psi: &MatrixStack, base: &CMat, powers: &[f64], delta: &[f64]) -> Result<CMat> {
    let n = psi.n as f64;
    let coef: Vec<f64> = powers.iter().zip(delta).map(|(p, d)| p / (n * (1.0 + d))).collect();
    let m = base + from_interleaved(psi.n, &psi.combine(&coef));
    herm_inverse(m, "fixed-point resolvent")
}

fn delta_map(psi: &MatrixStack, powers: &[f64], t: &CMat) -> Vec<f64> {
    let n = psi.n as f64;
    psi.dots(as_real(t)).iter().zip(powers).map(|(tr, p)| p * tr / n).collect()
}

/// `(I + sum_k p_k Delta_k) / N`.
fn base_matrix(delta_mats: &[CMat], powers: &[f64], n: usize) -> CMat {
    let mut base = CMat::identity(n, n);
    for (d, &p) in delta_mats.iter().zip(powers) {
        if p != 0.0 {
            base.zip_apply(d, |a, b| *a += b * p);
        }
    }
    base / C64::from(n as f64)
}

fn fixed_point_stack(psi: &MatrixStack, base: &CMat, powers: &[f64], opts: FixedPointOptions) -> Result<FixedPoint> {
    let mut delta = vec![1.0; powers.len()];
    let mut change = f64::INFINITY;
    for it in 1..=opts.max_iters {
        let t = resolvent(psi, base, powers, &delta)?;
        let next = delta_map(psi, powers, &t);
        change = max_relative_change(&next, &delta);
        delta = next;
        if change <= opts.tolerance {
            let t = resolvent(psi, base, powers, &delta)?;
            let residual = max_relative_change(&delta_map(psi, powers, &t), &delta);
            return Ok(FixedPoint { delta, t, iterations: it, residual });
        }
    }
    Err(Error::NonConvergence { iterations: opts.max_iters, residual: change })
}

fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { context, expected, got });
    }
    Ok(())
}

/// Solve the `(delta, T)` fixed point by Picard iteration from `delta = 1`.
pub fn solve_fixed_point(psi: &[CMat], delta_mats: &[CMat], powers: &[f64], opts: FixedPointOptions) -> Result<FixedPoint> {
    check_len("fixed point error covariances", psi.len(), delta_mats.len())?;
    check_len("fixed point powers", psi.len(), powers.len())?;
    let n = psi.first().map_or(0, |m| m.nrows());
    let stack = MatrixStack::new(psi);
    fixed_point_stack(&stack, &base_matrix(delta_mats, powers, n), powers, opts)
}

/// Second-order quantities for a batch of target users.
struct Block {
    f_mat: RMat,
    radius: f64,
    /// Columns: `f` for each target, then the identity-replaced `f`.
    rhs: RMat,
    eps: RMat,
    /// Rows: `T_check` for each target, then `T_tilde`; interleaved.
    checks: Vec<f64>,
}

fn second_order_block(
    psi: &[CMat],
    stack: &MatrixStack,
    fp: &FixedPoint,
    powers: &[f64],
    targets: &[usize],
) -> Result<Block> {
    let n = stack.n;
    let nf = n as f64;
    let lk = stack.rows;
    let w = stack.width();
    let t = &fp.t;
    let delta = &fp.delta;

    let mut y_rows = vec![0.0; lk * w];
    for (k, chunk) in y_rows.chunks_exact_mut(w).enumerate() {
        if powers[k] == 0.0 && !targets.contains(&k) {
            continue;
        }
        let tp = mul(t, Op::N, &psi[k], Op::N);
        let mut y = mul(&tp, Op::N, t, Op::N);
        hermitize(&mut y);
        chunk.copy_from_slice(as_real(&y));
    }
    let fraw = rows_dot(&stack.data, lk, &y_rows, lk, w);
    let f_mat = RMat::from_fn(lk, lk, |a, b| powers[a] * powers[b] * fraw[(a, b)] / (nf * nf * (1.0 + delta[b]).powi(2)));
    let radius = spectral_radius(&f_mat);
    if !(radius < 1.0) {
        return Err(Error::Infeasible { context: "second-order system", radius });
    }

    let mut t2 = mul(t, Op::N, t, Op::N);
    hermitize(&mut t2);
    let tr_psi_t2 = stack.dots(as_real(&t2));
    let nt = targets.len();
    let rhs = RMat::from_fn(lk, nt + 1, |k, i| {
        let tr = if i < nt { fraw[(k, targets[i])] } else { tr_psi_t2[k] };
        powers[k] * tr / nf
    });
    let system = RMat::identity(lk, lk) - &f_mat;
    let eps = system.lu().solve(&rhs).ok_or(Error::Singular("second-order system"))?;
    let e = RMat::from_fn(lk, nt + 1, |k, i| powers[k] * eps[(k, i)] / (nf * (1.0 + delta[k]).powi(2)));

    let mut checks = Vec::with_capacity((nt + 1) * w);
    for &q in targets {
        checks.extend_from_slice(&y_rows[q * w..(q + 1) * w]);
    }
    checks.extend_from_slice(as_real(&t2));
    dgemm(nt + 1, lk, w, 1.0, e.as_slice(), (lk, 1), &y_rows, (w, 1), 1.0, &mut checks, (w, 1));
    Ok(Block { f_mat, radius, rhs, eps, checks })
}

/// Second-order equivalents for one target user.
#[derive(Clone, Debug)]
pub struct SecondOrder {
    pub t_check: CMat,
    pub t_tilde: CMat,
    pub epsilon: Vec<f64>,
    pub epsilon_tilde: Vec<f64>,
    pub f_mat: RMat,
    pub f_vec: Vec<f64>,
    pub radius: f64,
}

/// `T_check`, `T_tilde`, `eps = (I - F)^-1 f`, `F` and `f` for target `target`
/// (flat user index within the observing BS).
pub fn second_order(psi: &[CMat], fp: &FixedPoint, powers: &[f64], target: usize) -> Result<SecondOrder> {
    check_len("second-order powers", psi.len(), powers.len())?;
    if target >= psi.len() {
        return Err(Error::Dimension { context: "second-order target", expected: psi.len(), got: target });
    }
    let stack = MatrixStack::new(psi);
    let b = second_order_block(psi, &stack, fp, powers, &[target])?;
    let w = stack.width();
    let mut t_check = from_interleaved(stack.n, &b.checks[..w]);
    let mut t_tilde = from_interleaved(stack.n, &b.checks[w..]);
    hermitize(&mut t_check);
    hermitize(&mut t_tilde);
    Ok(SecondOrder {
        t_check,
        t_tilde,
        epsilon: b.eps.column(0).iter().copied().collect(),
        epsilon_tilde: b.eps.column(1).iter().copied().collect(),
        f_mat: b.f_mat,
        f_vec: b.rhs.column(0).iter().copied().collect(),
        radius: b.radius,
    })
}

/// All deterministic equivalents seen from one BS `l`.
#[derive(Clone, Debug)]
pub struct CellEquilibrium {
    pub t: CMat,
    /// `delta_lmw`, including the power factor, over all `LK` users.
    pub delta: Vec<f64>,
    /// `tr(Psi_llq T) / N` for own users.
    pub delta_check: Vec<f64>,
    /// `tr(Omega_lmw R_llw T) / N` over all users.
    pub theta: Vec<C64>,
    /// `T_check` for each own user.
    pub t_check: Vec<CMat>,
    /// Identity-replaced `T_check`; identical for all own users.
    pub t_tilde: CMat,
    /// `LK x K`: column `q` is `eps` for own user `q`.
    pub epsilon: RMat,
    pub epsilon_tilde: Vec<f64>,
    pub f_mat: RMat,
    /// `LK x K`: column `q` is `f` for own user `q`.
    pub f_vec: RMat,
    pub f_radius: f64,
    /// `K x LK`: `tr(R_lmw T_check_q) / N^2`.
    pub zeta: RMat,
    /// `K x K`: `p_lw tr(Psi_llw T_check_q) / N^2`.
    pub eta: RMat,
    /// `K x LK`: `p_lw tr(Omega_lmw R_llw T_check_q) / N^2`.
    pub mu: DMatrix<C64>,
    pub xi_bar: Vec<f64>,
    /// `K x LK` per-unit-power interference of user `(m, w)` on detector `q`,
    /// scaled by `(1 + delta_llq)^2`; zero on the own entry.
    pub interference: RMat,
    pub fp_iterations: usize,
    pub fp_residual: f64,
}

impl CellEquilibrium {
    /// `xi_bar_q (1 + delta_llq)^2`.
    pub fn noise_term(&self, own: usize, q: usize) -> f64 {
        self.xi_bar[q] * (1.0 + self.delta[own]).powi(2)
    }
}

/// Deterministic equivalents for every BS at one power vector.
#[derive(Clone, Debug)]
pub struct DetEquilibrium {
    pub dims: Dims,
    pub powers: Vec<f64>,
    pub cells: Vec<CellEquilibrium>,
}

impl DetEquilibrium {
    pub fn noise_term(&self, l: usize, q: usize) -> f64 {
        self.cells[l].noise_term(self.dims.ut(l, q), q)
    }

    pub fn interference(&self, l: usize, q: usize, m: usize, w: usize) -> f64 {
        self.cells[l].interference[(q, self.dims.ut(m, w))]
    }

    pub fn delta_check(&self, l: usize, q: usize) -> f64 {
        self.cells[l].delta_check[q]
    }

    pub fn delta_own(&self, l: usize, q: usize) -> f64 {
        self.cells[l].delta[self.dims.ut(l, q)]
    }

    pub fn xi_bar(&self, l: usize, q: usize) -> f64 {
        self.cells[l].xi_bar[q]
    }

    pub fn ul_sinr(&self) -> Vec<f64> {
        asymptotic_ul_sinr(self, &self.powers)
    }
}

/// Asymptotic uplink SINR of every user.
pub fn asymptotic_ul_sinr(eq: &DetEquilibrium, powers: &[f64]) -> Vec<f64> {
    let d = eq.dims;
    let mut out = vec![0.0; d.lk()];
    for l in 0..d.cells {
        let cell = &eq.cells[l];
        for q in 0..d.users {
            let own = d.ut(l, q);
            let interference: f64 = cell.interference.row(q).iter().zip(powers).map(|(g, p)| g * p).sum();
            let num = powers[own] * cell.delta_check[q].powi(2);
            out[own] = num / (interference + cell.noise_term(own, q));
        }
    }
    out
}

struct CellOperands {
    psi: MatrixStack,
    r: MatrixStack,
    /// `Omega_lmw R_llw`.
    c: MatrixStack,
}

/// Statistical-CSI operands for all BSs, reusable across power vectors.
pub struct AsymptoticModel<'a> {
    dims: Dims,
    stats: &'a EstimationStats,
    cells: Vec<CellOperands>,
}

impl<'a> AsymptoticModel<'a> {
    pub fn new(cov: &CovarianceSet, stats: &'a EstimationStats) -> Self {
        let dims = stats.dims();
        let cells = (0..dims.cells)
            .into_par_iter()
            .map(|l| {
                let r: Vec<CMat> = (0..dims.lk()).map(|i| cov.r(l, i / dims.users, i % dims.users).clone()).collect();
                let c: Vec<CMat> = (0..dims.lk())
                    .map(|i| {
                        let (m, w) = (i / dims.users, i % dims.users);
                        mul(stats.omega(l, m, w), Op::N, cov.r(l, l, w), Op::N)
                    })
                    .collect();
                CellOperands { psi: MatrixStack::new(stats.psi_at(l)), r: MatrixStack::new(&r), c: MatrixStack::new(&c) }
            })
            .collect();
        Self { dims, stats, cells }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn equilibrium(&self, powers: &[f64], opts: FixedPointOptions) -> Result<DetEquilibrium> {
        check_len("asymptotic powers", self.dims.lk(), powers.len())?;
        let cells = (0..self.dims.cells)
            .into_par_iter()
            .map(|l| self.cell(l, powers, opts))
            .collect::<Result<Vec<_>>>()?;
        Ok(DetEquilibrium { dims: self.dims, powers: powers.to_vec(), cells })
    }

    fn cell(&self, l: usize, powers: &[f64], opts: FixedPointOptions) -> Result<CellEquilibrium> {
        let d = self.dims;
        let (n, lk, kk) = (d.antennas, d.lk(), d.users);
        let nf = n as f64;
        let ops = &self.cells[l];
        let w = ops.psi.width();

        let base = base_matrix(self.stats.delta_at(l), powers, n);
        let fp = fixed_point_stack(&ops.psi, &base, powers, opts)?;
        let targets: Vec<usize> = (0..kk).map(|q| d.ut(l, q)).collect();
        let b = second_order_block(self.stats.psi_at(l), &ops.psi, &fp, powers, &targets)?;
        let t = &fp.t;
        let delta = &fp.delta;

        let tr_psi_t = ops.psi.dots(as_real(t));
        let delta_check: Vec<f64> = targets.iter().map(|&i| tr_psi_t[i] / nf).collect();
        let t_tilde_row = &b.checks[kk * w..];
        let xi_bar: Vec<f64> = targets
            .iter()
            .map(|&i| {
                let tr: f64 = ops.psi.row(i).iter().zip(t_tilde_row).map(|(a, b)| a * b).sum();
                tr / (nf * nf * (1.0 + delta[i]).powi(2))
            })
            .collect();

        let th_re = ops.c.dots(as_real(t));
        let th_im = ops.c.dots(&swapped(t));
        let theta: Vec<C64> = th_re.iter().zip(&th_im).map(|(a, b)| C64::new(*a, *b) / nf).collect();

        let checks = &b.checks[..kk * w];
        let mut checks_sw = Vec::with_capacity(checks.len());
        for z in checks.chunks_exact(2) {
            checks_sw.extend_from_slice(&[-z[1], z[0]]);
        }
        let n2 = nf * nf;
        let zeta_raw = rows_dot(&ops.r.data, lk, checks, kk, w);
        let psi_raw = rows_dot(&ops.psi.data, lk, checks, kk, w);
        let mu_re = rows_dot(&ops.c.data, lk, checks, kk, w);
        let mu_im = rows_dot(&ops.c.data, lk, &checks_sw, kk, w);

        let zeta = RMat::from_fn(kk, lk, |q, i| zeta_raw[(i, q)] / n2);
        let eta = RMat::from_fn(kk, kk, |q, v| powers[d.ut(l, v)] * psi_raw[(d.ut(l, v), q)] / n2);
        let mu = DMatrix::from_fn(kk, lk, |q, i| {
            let p = powers[d.ut(l, i % kk)];
            C64::new(mu_re[(i, q)], mu_im[(i, q)]) * (p / n2)
        });
        let interference = RMat::from_fn(kk, lk, |q, i| {
            let (m, v) = (i / kk, i % kk);
            if v == q {
                if m == l {
                    0.0
                } else {
                    theta[i].norm_sqr()
                }
            } else {
                let own_v = d.ut(l, v);
                let dv = 1.0 + delta[own_v];
                zeta[(q, i)] + powers[own_v] * theta[i].norm_sqr() * eta[(q, v)] / (dv * dv)
                    - 2.0 * (theta[i].conj() * mu[(q, i)]).re / dv
            }
        });

        let mut t_check = Vec::with_capacity(kk);
        for row in checks.chunks_exact(w) {
            let mut m = from_interleaved(n, row);
            hermitize(&mut m);
            t_check.push(m);
        }
        let mut t_tilde = from_interleaved(n, t_tilde_row);
        hermitize(&mut t_tilde);

        Ok(CellEquilibrium {
            t: fp.t.clone(),
            delta: fp.delta.clone(),
            delta_check,
            theta,
            t_check,
            t_tilde,
            epsilon: b.eps.columns(0, kk).into_owned(),
            epsilon_tilde: b.eps.column(kk).iter().copied().collect(),
            f_mat: b.f_mat,
            f_vec: b.rhs.columns(0, kk).into_owned(),
            f_radius: b.radius,
            zeta,
            eta,
            mu,
            xi_bar,
            interference,
            fp_iterations: fp.iterations,
            fp_residual: fp.residual,
        })
    }
}

/// Build the operands and evaluate the equilibrium in one call.
pub fn equilibrium(
    cov: &CovarianceSet,
    stats: &EstimationStats,
    powers: &[f64],
    opts: FixedPointOptions,
) -> Result<DetEquilibrium> {
    AsymptoticModel::new(cov, stats).equilibrium(powers, opts)
}

/// Closed forms for one user, `Psi = I_N`, `Delta = 0`, unit power.
///
/// `delta` solves `delta^2 + (2 - N) delta - N = 0`; at `N = 1` this is the
/// golden ratio conjugate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GoldenValues {
    pub antennas: usize,
    pub delta: f64,
    /// `T = t I_N`.
    pub t: f64,
    pub f: f64,
    pub xi_bar: f64,
    pub sinr: f64,
}

pub fn golden(antennas: usize) -> GoldenValues {
    let n = antennas as f64;
    let delta = ((n - 2.0) + (n * n + 4.0).sqrt()) / 2.0;
    let t = n * (1.0 + delta) / (2.0 + delta);
    let f = t * t / (n * (1.0 + delta).powi(2));
    let xi_bar = f / (1.0 - f);
    let sinr = n * (1.0 - f);
    GoldenValues { antennas, delta, t, f, xi_bar, sinr }
}
