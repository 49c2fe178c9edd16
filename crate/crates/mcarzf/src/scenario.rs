//! Multi-cell geometry, pathloss and ULA spatial covariances.
//!
//! Links are indexed by `(l, j, k)`: the channel between BS `l` and user
//! `k` of cell `j`. Flat storage uses [`Dims::link`].

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitize, mul, psd_sqrt, CMat, Op, C64};

const MAX_PLACEMENT_ATTEMPTS: usize = 1_000_000;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Mix a seed with a stream tag (splitmix64 finalizer).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// All scenario and numerical parameters of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub cells: usize,
    pub users: usize,
    pub antennas: usize,
    /// Average per-user downlink SNR (linear).
    pub rho_dl: f64,
    /// Training SNR (linear).
    pub rho_tr: f64,
    pub omega: f64,
    pub pathloss_exponent: f64,
    pub min_ut_distance: f64,
    pub mc_trials: usize,
    pub n_drops: usize,
    pub maxmin_epsilon: f64,
    pub maxmin_max_iters: usize,
    pub fp_tolerance: f64,
    pub fp_max_iters: usize,
    /// Conventional RZF regularization; `None` means `K / (N rho_dl)`.
    pub rzf_alpha: Option<f64>,
    pub seed: u64,
    /// Worker threads for Monte-Carlo work; 0 uses the rayon default.
    pub threads: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            cells: 7,
            users: 20,
            antennas: 60,
            rho_dl: 10.0,
            rho_tr: 10.0,
            omega: 0.5,
            pathloss_exponent: 3.7,
            min_ut_distance: 0.2,
            mc_trials: 500,
            n_drops: 20,
            maxmin_epsilon: 0.01,
            maxmin_max_iters: 10,
            fp_tolerance: 1e-8,
            fp_max_iters: 1000,
            rzf_alpha: None,
            seed: 0,
            threads: 0,
        }
    }
}

impl SystemConfig {
    /// Check every invariant and report all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        for (name, x) in [
            ("cells", self.cells),
            ("users", self.users),
            ("antennas", self.antennas),
            ("mc_trials", self.mc_trials),
            ("n_drops", self.n_drops),
            ("maxmin_max_iters", self.maxmin_max_iters),
            ("fp_max_iters", self.fp_max_iters),
        ] {
            if x == 0 {
                v.push(format!("{name} must be at least 1"));
            }
        }
        for (name, x) in [
            ("rho_dl", self.rho_dl),
            ("rho_tr", self.rho_tr),
            ("omega", self.omega),
            ("pathloss_exponent", self.pathloss_exponent),
            ("maxmin_epsilon", self.maxmin_epsilon),
            ("fp_tolerance", self.fp_tolerance),
        ] {
            if !(x.is_finite() && x > 0.0) {
                v.push(format!("{name} must be finite and > 0 (got {x})"));
            }
        }
        if !(0.0..1.0).contains(&self.min_ut_distance) {
            v.push(format!("min_ut_distance must lie in [0, 1) (got {})", self.min_ut_distance));
        }
        if let Some(a) = self.rzf_alpha {
            if !(a.is_finite() && a > 0.0) {
                v.push(format!("rzf_alpha must be finite and > 0 (got {a})"));
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    pub fn dims(&self) -> Dims {
        Dims { cells: self.cells, users: self.users, antennas: self.antennas }
    }

    pub fn alpha(&self) -> f64 {
        self.rzf_alpha
            .unwrap_or(self.users as f64 / (self.antennas as f64 * self.rho_dl))
    }
}

/// Network dimensions and flat index conventions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub cells: usize,
    pub users: usize,
    pub antennas: usize,
}

impl Dims {
    /// Number of users in the network, `LK`.
    pub fn lk(&self) -> usize {
        self.cells * self.users
    }

    /// Flat user index of user `k` in cell `j`.
    pub fn ut(&self, j: usize, k: usize) -> usize {
        j * self.users + k
    }

    /// Flat index of link `(l, j, k)`.
    pub fn link(&self, l: usize, j: usize, k: usize) -> usize {
        (l * self.cells + j) * self.users + k
    }

    pub fn links(&self) -> usize {
        self.cells * self.cells * self.users
    }
}

/// BS and user positions plus the per-user azimuth offsets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub bs_positions: Vec<[f64; 2]>,
    /// Flat over [`Dims::ut`].
    pub ut_positions: Vec<[f64; 2]>,
    /// Angular offset of each user's steering fan, in `[0, 2 pi)`.
    pub ut_azimuth: Vec<f64>,
    pub users: usize,
}

impl Geometry {
    pub fn cells(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn distance(&self, l: usize, j: usize, k: usize) -> f64 {
        let b = self.bs_positions[l];
        let u = self.ut_positions[j * self.users + k];
        (u[0] - b[0]).hypot(u[1] - b[1])
    }
}

/// BS sites of a hexagonal layout with circumradius-1 cells, center first,
/// then ring by ring in counter-clockwise order.
pub fn hex_sites(cells: usize) -> Vec<[f64; 2]> {
    let s3 = 3f64.sqrt();
    let mut rings = 0i64;
    while ((3 * rings * (rings + 1) + 1) as usize) < cells {
        rings += 1;
    }
    let mut sites: Vec<(i64, f64, [f64; 2])> = Vec::new();
    for a in -rings..=rings {
        for b in -rings..=rings {
            let ring = a.abs().max(b.abs()).max((a + b).abs());
            if ring > rings {
                continue;
            }
            let (a, b) = (a as f64, b as f64);
            // Lattice vectors sqrt(3) at 30 and 90 degrees.
            let p = [1.5 * a, s3 * (0.5 * a + b)];
            let ang = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
            sites.push((ring, if ring == 0 { 0.0 } else { ang }, p));
        }
    }
    sites.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
    sites.into_iter().take(cells).map(|s| s.2).collect()
}

fn in_hexagon(x: f64, y: f64) -> bool {
    let s3 = 3f64.sqrt();
    y.abs() <= s3 / 2.0 && s3 * x.abs() + y.abs() <= s3
}

/// Place `K` users uniformly in each hexagonal cell.
pub fn drop_users(config: &SystemConfig, seed: u64) -> Result<Geometry> {
    config.validate()?;
    let bs = hex_sites(config.cells);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 3f64.sqrt() / 2.0;
    let mut pos = Vec::with_capacity(config.cells * config.users);
    let mut az = Vec::with_capacity(config.cells * config.users);
    for (j, b) in bs.iter().enumerate() {
        for k in 0..config.users {
            let mut placed = None;
            for _ in 0..MAX_PLACEMENT_ATTEMPTS {
                let x = rng.random_range(-1.0..=1.0);
                let y = rng.random_range(-h..=h);
                if in_hexagon(x, y) && x.hypot(y) >= config.min_ut_distance {
                    placed = Some([b[0] + x, b[1] + y]);
                    break;
                }
            }
            let p = placed.ok_or(Error::Geometry {
                cell: j,
                user: k,
                attempts: MAX_PLACEMENT_ATTEMPTS,
            })?;
            pos.push(p);
            az.push(rng.random_range(0.0..2.0 * PI));
        }
    }
    Ok(Geometry { bs_positions: bs, ut_positions: pos, ut_azimuth: az, users: config.users })
}

/// ULA steering fan: column `p` is `a(phi_p)` with `phi_p = phi0 - pi/2 + pi p / N`.
pub fn steering_matrix(antennas: usize, omega: f64, phi0: f64) -> CMat {
    let n = antennas as f64;
    let scale = 1.0 / n.sqrt();
    CMat::from_fn(antennas, antennas, |row, p| {
        let phi = phi0 - PI / 2.0 + PI * p as f64 / n;
        C64::from_polar(scale, -2.0 * PI * omega * row as f64 * phi.sin())
    })
}

/// Per-link covariances `R_ljk` and square roots with `R = sqrt sqrt^H`.
#[derive(Clone, Debug)]
pub struct CovarianceSet {
    dims: Dims,
    r: Vec<CMat>,
    sqrt: Vec<CMat>,
    pathloss: Vec<f64>,
}

impl CovarianceSet {
    /// Build from square-root factors; `R` is formed as `sqrt sqrt^H`.
    pub fn from_sqrt(cells: usize, users: usize, sqrt: Vec<CMat>) -> Result<Self> {
        let antennas = sqrt.first().map_or(0, |m| m.nrows());
        let dims = Dims { cells, users, antennas };
        check_len(&dims, sqrt.len())?;
        let r: Vec<CMat> = sqrt
            .iter()
            .map(|s| {
                let mut r = mul(s, Op::N, s, Op::H);
                hermitize(&mut r);
                r
            })
            .collect();
        let pathloss = r.iter().map(|m| m.trace().re / antennas as f64).collect();
        Ok(Self { dims, r, sqrt, pathloss })
    }

    /// Build from externally supplied covariances; square roots come from an
    /// eigendecomposition with negative eigenvalues clipped to zero.
    pub fn from_covariances(cells: usize, users: usize, r: Vec<CMat>) -> Result<Self> {
        let antennas = r.first().map_or(0, |m| m.nrows());
        let dims = Dims { cells, users, antennas };
        check_len(&dims, r.len())?;
        let mut r = r;
        for m in &mut r {
            if m.nrows() != antennas || m.ncols() != antennas {
                return Err(Error::Dimension { context: "covariance", expected: antennas, got: m.nrows() });
            }
            hermitize(m);
        }
        let sqrt = r.iter().map(psd_sqrt).collect();
        let pathloss = r.iter().map(|m| m.trace().re / antennas as f64).collect();
        Ok(Self { dims, r, sqrt, pathloss })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn r(&self, l: usize, j: usize, k: usize) -> &CMat {
        &self.r[self.dims.link(l, j, k)]
    }

    pub fn sqrt(&self, l: usize, j: usize, k: usize) -> &CMat {
        &self.sqrt[self.dims.link(l, j, k)]
    }

    /// `tr(R_ljk) / N`.
    pub fn pathloss(&self, l: usize, j: usize, k: usize) -> f64 {
        self.pathloss[self.dims.link(l, j, k)]
    }

    /// All covariances in flat link order.
    pub fn all(&self) -> &[CMat] {
        &self.r
    }

    pub fn all_sqrt(&self) -> &[CMat] {
        &self.sqrt
    }
}

fn check_len(dims: &Dims, got: usize) -> Result<()> {
    if got != dims.links() || dims.antennas == 0 {
        return Err(Error::Dimension { context: "covariance set", expected: dims.links(), got });
    }
    Ok(())
}

/// Pathloss and ULA correlation for every link of a drop.
pub fn build_covariances(geometry: &Geometry, config: &SystemConfig) -> Result<CovarianceSet> {
    let dims = config.dims();
    if geometry.cells() != dims.cells || geometry.users != dims.users {
        return Err(Error::Dimension { context: "geometry", expected: dims.lk(), got: geometry.ut_positions.len() });
    }
    let mut sqrt = vec![CMat::zeros(0, 0); dims.links()];
    for j in 0..dims.cells {
        for k in 0..dims.users {
            let a = steering_matrix(dims.antennas, config.omega, geometry.ut_azimuth[dims.ut(j, k)]);
            for l in 0..dims.cells {
                let lambda = geometry.distance(l, j, k).powf(-config.pathloss_exponent);
                sqrt[dims.link(l, j, k)] = &a * C64::from(lambda.sqrt());
            }
        }
    }
    CovarianceSet::from_sqrt(dims.cells, dims.users, sqrt)
}

/// Covariances with a fixed pathloss `own` towards the serving BS and `cross`
/// towards every other BS, and random ULA azimuth offsets per user.
pub fn two_level_covariances(dims: Dims, own: f64, cross: f64, omega: f64, seed: u64) -> Result<CovarianceSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sqrt = vec![CMat::zeros(0, 0); dims.links()];
    for j in 0..dims.cells {
        for k in 0..dims.users {
            let a = steering_matrix(dims.antennas, omega, rng.random_range(0.0..2.0 * PI));
            for l in 0..dims.cells {
                let lambda = if l == j { own } else { cross };
                sqrt[dims.link(l, j, k)] = &a * C64::from(lambda.sqrt());
            }
        }
    }
    CovarianceSet::from_sqrt(dims.cells, dims.users, sqrt)
}
