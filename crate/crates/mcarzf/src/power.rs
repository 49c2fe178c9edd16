//! Max-min uplink power iteration and uplink/downlink duality.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spectral_radius, RMat, C64};
use crate::rmt::DetEquilibrium;
use crate::scenario::SystemConfig;

/// SINRs below this value are treated as an isolated user.
pub const SINR_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaxMinOptions {
    /// Per-user power cap, `rho_dl`.
    pub cap: f64,
    pub epsilon: f64,
    pub max_iters: usize,
}

impl MaxMinOptions {
    pub fn from_config(c: &SystemConfig) -> Self {
        Self { cap: c.rho_dl, epsilon: c.maxmin_epsilon, max_iters: c.maxmin_max_iters }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerSolution {
    pub ul_powers: Vec<f64>,
    pub ul_sinr: Vec<f64>,
    /// Filled in once a duality map has been applied.
    pub dl_powers: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Minimum SINR at the start of every iteration, then at the final powers.
    pub history: Vec<f64>,
}

fn min_of(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::INFINITY, f64::min)
}

fn checked_sinr<F>(sinr_fn: &mut F, p: &[f64]) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let s = sinr_fn(p)?;
    if s.len() != p.len() {
        return Err(Error::Dimension { context: "SINR evaluator", expected: p.len(), got: s.len() });
    }
    for (i, (&si, &pi)) in s.iter().zip(p).enumerate() {
        if pi > 0.0 && !(si >= SINR_FLOOR) {
            return Err(Error::IsolatedUser { index: i, sinr: si });
        }
    }
    Ok(s)
}

/// Normalize-and-invert iteration `p <- p / SINR(p)`, rescaled to `max p = cap`.
pub fn maxmin_ul_powers<F>(users: usize, mut sinr_fn: F, opts: MaxMinOptions) -> Result<PowerSolution>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut p = vec![opts.cap; users];
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    for it in 1..=opts.max_iters {
        let s = checked_sinr(&mut sinr_fn, &p)?;
        history.push(min_of(&s));
        let mut next: Vec<f64> = p.iter().zip(&s).map(|(pi, si)| pi / si).collect();
        let peak = next.iter().copied().fold(0.0, f64::max);
        for x in &mut next {
            *x *= opts.cap / peak;
        }
        let diff: f64 = next.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        p = next;
        iterations = it;
        if diff <= opts.epsilon * norm {
            converged = true;
            break;
        }
    }
    let ul_sinr = checked_sinr(&mut sinr_fn, &p)?;
    history.push(min_of(&ul_sinr));
    Ok(PowerSolution { ul_powers: p, ul_sinr, dl_powers: Vec::new(), iterations, converged, history })
}

/// Running sums of the cross gains `X[(j,k),(l,q)] = v_jk^H g_jlq`.
#[derive(Clone, Debug)]
pub struct LinkAccumulator {
    sum_own: Vec<C64>,
    sum_sq: RMat,
    count: usize,
}

impl LinkAccumulator {
    pub fn new(users: usize) -> Self {
        Self { sum_own: vec![C64::new(0.0, 0.0); users], sum_sq: RMat::zeros(users, users), count: 0 }
    }

    /// Add one realization; `x` is `LK x LK` with row `(j,k)` and column `(l,q)`.
    pub fn add(&mut self, x: &nalgebra::DMatrix<C64>) {
        for (i, s) in self.sum_own.iter_mut().enumerate() {
            *s += x[(i, i)];
        }
        self.sum_sq.zip_apply(x, |a, b| *a += b.norm_sqr());
        self.count += 1;
    }

    pub fn merge(&mut self, other: &LinkAccumulator) {
        for (a, b) in self.sum_own.iter_mut().zip(&other.sum_own) {
            *a += b;
        }
        self.sum_sq += &other.sum_sq;
        self.count += other.count;
    }

    pub fn finish(&self) -> LinkStatistics {
        let t = self.count.max(1) as f64;
        LinkStatistics {
            mean_own: self.sum_own.iter().map(|z| z / t).collect(),
            second: &self.sum_sq / t,
            trials: self.count,
        }
    }
}

/// Sample moments: `mean_own[jk] = E{v_jk^H g_jjk}` and
/// `second[(jk, lq)] = E{|v_jk^H g_jlq|^2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkStatistics {
    pub mean_own: Vec<C64>,
    pub second: RMat,
    pub trials: usize,
}

impl LinkStatistics {
    pub fn users(&self) -> usize {
        self.mean_own.len()
    }

    /// Uplink SINR with detectors `v` and uplink powers `p`.
    pub fn ul_sinr(&self, p: &[f64]) -> Vec<f64> {
        (0..self.users())
            .map(|i| {
                let useful = p[i] * self.mean_own[i].norm_sqr();
                let total: f64 = self.second.row(i).iter().zip(p).map(|(s, q)| s * q).sum();
                useful / (total - useful + 1.0)
            })
            .collect()
    }

    /// Downlink SINR with precoders `v` and downlink powers `p`.
    pub fn dl_sinr(&self, p: &[f64]) -> Vec<f64> {
        (0..self.users())
            .map(|i| {
                let useful = p[i] * self.mean_own[i].norm_sqr();
                let total: f64 = self.second.column(i).iter().zip(p).map(|(s, q)| s * q).sum();
                useful / (total - useful + 1.0)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DualityKind {
    Empirical,
    Asymptotic,
}

/// Operands of `p = (I - diag(a) A^T)^-1 a`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualityData {
    pub kind: DualityKind,
    pub a: Vec<f64>,
    pub coupling: RMat,
}

/// `a = SINR / |E v^H g|^2` and `A = E|v^H g|^2` with the own-link variance
/// on the diagonal.
pub fn duality_operands_empirical(stats: &LinkStatistics, ul_sinr: &[f64]) -> DualityData {
    let lk = stats.users();
    let a = (0..lk).map(|i| ul_sinr[i] / stats.mean_own[i].norm_sqr()).collect();
    let mut coupling = stats.second.clone();
    for i in 0..lk {
        coupling[(i, i)] -= stats.mean_own[i].norm_sqr();
    }
    DualityData { kind: DualityKind::Empirical, a, coupling }
}

/// Deterministic counterpart built from the asymptotic interference terms.
pub fn duality_operands_asymptotic(eq: &DetEquilibrium, ul_sinr: &[f64]) -> DualityData {
    let d = eq.dims;
    let lk = d.lk();
    let mut a = vec![0.0; lk];
    let mut coupling = RMat::zeros(lk, lk);
    for l in 0..d.cells {
        for q in 0..d.users {
            let i = d.ut(l, q);
            let noise = eq.noise_term(l, q);
            a[i] = noise * ul_sinr[i] / eq.delta_check(l, q).powi(2);
            for (c, g) in eq.cells[l].interference.row(q).iter().enumerate() {
                coupling[(i, c)] = g / noise;
            }
        }
    }
    DualityData { kind: DualityKind::Asymptotic, a, coupling }
}

/// Downlink powers achieving the uplink SINR targets.
pub fn dl_powers(ops: &DualityData) -> Result<Vec<f64>> {
    let lk = ops.a.len();
    let mut m = ops.coupling.transpose();
    for (i, mut row) in m.row_iter_mut().enumerate() {
        row *= ops.a[i];
    }
    let context = match ops.kind {
        DualityKind::Empirical => "empirical duality",
        DualityKind::Asymptotic => "asymptotic duality",
    };
    let radius = spectral_radius(&m);
    if !(radius < 1.0) {
        return Err(Error::Infeasible { context, radius });
    }
    let system = RMat::identity(lk, lk) - m;
    let rhs = nalgebra::DVector::from_column_slice(&ops.a);
    let p = system.lu().solve(&rhs).ok_or(Error::Infeasible { context, radius })?;
    let scale = p.amax().max(f64::MIN_POSITIVE);
    if p.iter().any(|&x| x < -1e-12 * scale || !x.is_finite()) {
        return Err(Error::Infeasible { context, radius });
    }
    Ok(p.iter().map(|x| x.max(0.0)).collect())
}
