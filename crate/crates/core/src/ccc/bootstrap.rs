//! Nonparametric bootstrap of the group correlations, re-ranking and
//! refitting the sub-vine on every replicate.

use super::groups::group_stats;
use super::partition::Partition;
use crate::dvine::{rank_pseudo_obs, stepwise_fit, EdgeId, FittedTrees};
use crate::error::{Error, Result};
use crate::rng::substream;
use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

const MIN_REPLICATES: usize = 10;

/// `n` times the bootstrap covariance of the correlation vector of `edge`
/// over `part`, whose thresholds stay fixed across replicates. Replicates
/// whose refit fails are skipped.
pub fn bootstrap_covariance(
    fit: &FittedTrees,
    edge: EdgeId,
    part: &Partition,
    replicates: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    edge.check(fit.dim())?;
    let n = fit.n();
    let m = edge.tree + 1;
    let families = fit.families().sub(edge.pos, m);
    let cols: Vec<&[f64]> = (0..m).map(|c| fit.sample().column(edge.pos + c)).collect();
    let sub_edge = EdgeId::new(edge.tree, 0);

    let draws: Vec<Option<Vec<f64>>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, b as u64, 0);
            let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let resampled: Vec<Vec<f64>> = cols
                .iter()
                .map(|c| rows.iter().map(|&k| c[k]).collect())
                .collect();
            let run = || -> Result<Vec<f64>> {
                let sample = rank_pseudo_obs(&resampled)?;
                let refit = stepwise_fit(&sample, &families, edge.tree - 1)?;
                let (x, y) = refit.compute_ppits(sub_edge)?;
                let cond: Vec<&[f64]> = sub_edge.conditioning().map(|c| sample.column(c)).collect();
                Ok(group_stats(x, y, &cond, part)?.correlations())
            };
            match run() {
                Ok(r) => Some(r),
                Err(e) => {
                    log::warn!("bootstrap replicate {b} skipped: {e}");
                    None
                }
            }
        })
        .collect();
    let ok: Vec<Vec<f64>> = draws.into_iter().flatten().collect();
    if ok.len() < MIN_REPLICATES {
        return Err(Error::Numeric(format!(
            "only {} of {replicates} bootstrap replicates succeeded",
            ok.len()
        )));
    }
    let l = part.len();
    let b = ok.len() as f64;
    let mean: Vec<f64> = (0..l)
        .map(|i| ok.iter().map(|r| r[i]).sum::<f64>() / b)
        .collect();
    Ok(DMatrix::from_fn(l, l, |i, j| {
        n as f64
            * ok.iter()
                .map(|r| (r[i] - mean[i]) * (r[j] - mean[j]))
                .sum::<f64>()
            / (b - 1.0)
    }))
}
