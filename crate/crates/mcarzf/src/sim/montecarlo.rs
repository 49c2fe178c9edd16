use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{draw_channels_with, estimate_channels_with, ChannelSet, EstimateSet, EstimationStats};
use crate::error::{Error, Result};
use crate::linalg::{gemm, CMat, Op, ONE, ZERO};
use crate::power::{LinkAccumulator, LinkStatistics};
use crate::precoder::{conventional_rzf_vectors, mca_regularizers, mca_rzf_with, PrecoderSet};
use crate::scenario::{build_covariances, derive_seed, drop_users, CovarianceSet, Geometry, SystemConfig};

/// Trials per work unit. Fixed so that results do not depend on the number
/// of worker threads.
const CHUNK: usize = 8;

/// Everything about one user drop that does not change between trials.
#[derive(Clone, Debug)]
pub struct DropContext {
    pub config: SystemConfig,
    pub geometry: Option<Geometry>,
    pub cov: CovarianceSet,
    pub stats: Arc<EstimationStats>,
}

impl DropContext {
    /// Drop users with `seed` and derive covariances and estimation operators.
    pub fn generate(config: &SystemConfig, seed: u64) -> Result<Self> {
        let geometry = drop_users(config, seed)?;
        let cov = build_covariances(&geometry, config)?;
        let stats = Arc::new(EstimationStats::new(&cov, config.rho_tr)?);
        Ok(Self { config: config.clone(), geometry: Some(geometry), cov, stats })
    }

    /// Use externally supplied covariances instead of a geometric drop.
    pub fn from_covariances(config: &SystemConfig, cov: CovarianceSet) -> Result<Self> {
        config.validate()?;
        if cov.dims() != config.dims() {
            return Err(Error::Dimension { context: "covariance set vs config", expected: config.dims().links(), got: cov.dims().links() });
        }
        let stats = Arc::new(EstimationStats::new(&cov, config.rho_tr)?);
        Ok(Self { config: config.clone(), geometry: None, cov, stats })
    }

    /// Channels and estimates of trial `t` under the trial seed stream `seed`.
    pub fn trial(&self, seed: u64, t: usize) -> (ChannelSet, EstimateSet) {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, t as u64));
        let ch = draw_channels_with(&self.cov, &mut rng);
        let est = estimate_channels_with(&ch, &self.stats, &mut rng);
        (ch, est)
    }
}

/// How precoding vectors are formed from one set of estimates.
#[derive(Clone, Debug, PartialEq)]
pub enum PrecoderRecipe {
    Rzf { alpha: f64 },
    Mca { powers: Vec<f64> },
}

pub(crate) struct Prepared<'a> {
    recipe: &'a PrecoderRecipe,
    regularizers: Option<Vec<CMat>>,
}

impl<'a> Prepared<'a> {
    pub(crate) fn new(recipe: &'a PrecoderRecipe, stats: &EstimationStats) -> Self {
        let regularizers = match recipe {
            PrecoderRecipe::Mca { powers } => Some(mca_regularizers(stats, powers)),
            PrecoderRecipe::Rzf { .. } => None,
        };
        Self { recipe, regularizers }
    }

    pub(crate) fn build(&self, est: &EstimateSet) -> Result<PrecoderSet> {
        match (self.recipe, &self.regularizers) {
            (PrecoderRecipe::Rzf { alpha }, _) => conventional_rzf_vectors(est, *alpha),
            (PrecoderRecipe::Mca { powers }, Some(reg)) => mca_rzf_with(est, powers, reg),
            (PrecoderRecipe::Mca { powers }, None) => crate::precoder::mca_rzf_vectors(est, powers),
        }
    }
}

/// `X[(j,k),(l,q)] = v_jk^H g_jlq`.
pub fn cross_gains(v: &PrecoderSet, ch: &ChannelSet) -> CMat {
    let d = ch.dims();
    let mut x = CMat::zeros(d.lk(), d.lk());
    for j in 0..d.cells {
        let mut block = CMat::zeros(d.users, d.lk());
        gemm(ONE, &v.v[j], Op::H, &ch.g[j], Op::N, ZERO, &mut block);
        x.rows_mut(d.ut(j, 0), d.users).copy_from(&block);
    }
    x
}

/// Sample moments of the cross gains for several precoder recipes on common
/// channel draws.
pub fn link_statistics(ctx: &DropContext, recipes: &[PrecoderRecipe], trials: usize, seed: u64) -> Result<Vec<LinkStatistics>> {
    let lk = ctx.cov.dims().lk();
    let prepared: Vec<Prepared> = recipes.iter().map(|r| Prepared::new(r, &ctx.stats)).collect();
    let chunks = trials.div_ceil(CHUNK);
    let parts: Vec<Result<Vec<LinkAccumulator>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![LinkAccumulator::new(lk); recipes.len()];
            for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let (ch, est) = ctx.trial(seed, t);
                for (a, p) in acc.iter_mut().zip(&prepared) {
                    a.add(&cross_gains(&p.build(&est)?, &ch));
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = vec![LinkAccumulator::new(lk); recipes.len()];
    for part in parts {
        for (t, p) in total.iter_mut().zip(part?) {
            t.merge(&p);
        }
    }
    Ok(total.iter().map(LinkAccumulator::finish).collect())
}

/// Monte-Carlo downlink SINR of every user.
pub fn empirical_dl_sinr(ctx: &DropContext, recipe: &PrecoderRecipe, powers: &[f64], trials: usize, seed: u64) -> Result<Vec<f64>> {
    let stats = link_statistics(ctx, std::slice::from_ref(recipe), trials, seed)?;
    Ok(stats[0].dl_sinr(powers))
}

/// Monte-Carlo uplink SINR with the precoders used as receive filters.
pub fn empirical_ul_sinr(ctx: &DropContext, recipe: &PrecoderRecipe, ul_powers: &[f64], trials: usize, seed: u64) -> Result<Vec<f64>> {
    let stats = link_statistics(ctx, std::slice::from_ref(recipe), trials, seed)?;
    Ok(stats[0].ul_sinr(ul_powers))
}
