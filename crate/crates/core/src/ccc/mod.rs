//! Constant conditional correlation statistics: group correlations over a
//! partition of the conditioning support, their covariance, quadratic-form
//! statistics and the penalised combination over several partitions.

mod bootstrap;
mod chi2;
mod groups;
mod partition;
mod penalty;
mod quadform;
mod sandwich;

pub use bootstrap::bootstrap_covariance;
pub use chi2::{chi2_cdf, chi2_quantile, chi2_sf};
pub(crate) use groups::group_stats_labelled;
pub use groups::{corr_variance_star, group_stats, influence_covariance, GroupStats, LeafStats};
pub use partition::{quantile, Axis, Condition, Leaf, Op, Partition};
pub use penalty::{combine_with_penalty, penalty_bound, PenaltySpec};
pub use quadform::{average_matrix, difference_matrix, quadratic_statistic};
pub use sandwich::{sandwich_covariance, sandwich_parts, SandwichParts, Sensitivity};

use crate::dvine::{EdgeId, FittedTrees};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// How the covariance of the group correlations is estimated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovMode {
    /// Treats the pseudo-observations as exact; diagonal.
    OracleStar,
    /// Adds the corrections for sub-vine estimation and ranks.
    #[default]
    Sandwich,
    /// Adds only the sub-vine estimation correction (known margins).
    SandwichKnownMargins,
    Bootstrap {
        replicates: usize,
        #[serde(default)]
        seed: u64,
    },
}

impl CovMode {
    pub fn needs_fit(&self) -> bool {
        !matches!(self, CovMode::OracleStar)
    }
}

impl std::str::FromStr for CovMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase().replace('-', "_");
        Ok(match s.as_str() {
            "oracle" | "oracle_star" | "star" => CovMode::OracleStar,
            "sandwich" => CovMode::Sandwich,
            "sandwich_known_margins" | "known_margins" => CovMode::SandwichKnownMargins,
            _ => {
                let reps = s
                    .strip_prefix("bootstrap")
                    .map(|r| r.trim_start_matches([':', '=']))
                    .ok_or_else(|| Error::Parse(format!("unknown covariance mode '{s}'")))?;
                let replicates = if reps.is_empty() {
                    500
                } else {
                    reps.parse().map_err(|_| {
                        Error::Parse(format!("bad bootstrap replicate count '{reps}'"))
                    })?
                };
                CovMode::Bootstrap {
                    replicates,
                    seed: 0,
                }
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyRecord {
    pub n_lambda: f64,
    pub t_gamma0: f64,
    pub t_gamma_max: f64,
    pub b_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub mode: CovMode,
    pub penalty: Option<PenaltyRecord>,
    pub partition: Partition,
}

impl TestOutcome {
    pub fn rejects(&self, level: f64) -> bool {
        self.p_value < level
    }
}

/// The pseudo-observation pair of one edge, its conditioning columns and,
/// when the pair comes from a fitted sub-vine, the fit it came from.
#[derive(Debug)]
pub struct EdgeData<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub cond: Vec<&'a [f64]>,
    pub fit: Option<(&'a FittedTrees, EdgeId)>,
    sensitivity: OnceLock<Sensitivity>,
}

impl<'a> EdgeData<'a> {
    /// Pair treated as exact pseudo-observations.
    pub fn oracle(x: &'a [f64], y: &'a [f64], cond: Vec<&'a [f64]>) -> Self {
        EdgeData {
            x,
            y,
            cond,
            fit: None,
            sensitivity: OnceLock::new(),
        }
    }

    /// Pair produced by the trees of `fit` below `edge`.
    pub fn from_fit(fit: &'a FittedTrees, edge: EdgeId) -> Result<Self> {
        edge.check(fit.dim())?;
        if edge.tree < 2 {
            return Err(Error::Domain(format!(
                "edge {edge} has no conditioning variables"
            )));
        }
        let (x, y) = fit.compute_ppits(edge)?;
        let cond = edge
            .conditioning()
            .map(|c| fit.sample().column(c))
            .collect();
        Ok(EdgeData {
            x,
            y,
            cond,
            fit: Some((fit, edge)),
            sensitivity: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn group_stats(&self, part: &Partition) -> Result<GroupStats> {
        group_stats(self.x, self.y, &self.cond, part)
    }

    /// Sub-vine sensitivities, computed on first use and shared by every
    /// partition tested on this edge.
    pub fn sensitivity(&self) -> Result<&Sensitivity> {
        let (fit, edge) = self
            .fit
            .ok_or_else(|| Error::State("sensitivities need the fitted sub-vine".into()))?;
        if let Some(s) = self.sensitivity.get() {
            return Ok(s);
        }
        let s = Sensitivity::compute(fit, edge, true)?;
        Ok(self.sensitivity.get_or_init(|| s))
    }
}

/// Covariance of the correlation vector under `mode`.
pub fn correlation_covariance(
    data: &EdgeData<'_>,
    part: &Partition,
    stats: &GroupStats,
    mode: CovMode,
) -> Result<DMatrix<f64>> {
    let fitted = || {
        data.fit
            .ok_or_else(|| Error::State(format!("{mode:?} covariance needs the fitted sub-vine")))
    };
    Ok(match mode {
        CovMode::OracleStar => {
            let l = stats.num_leaves();
            DMatrix::from_fn(l, l, |a, b| {
                if a == b {
                    corr_variance_star(stats, data.x, data.y, a)
                } else {
                    0.0
                }
            })
        }
        CovMode::Sandwich | CovMode::SandwichKnownMargins => {
            let (fit, _) = fitted()?;
            let rank = mode == CovMode::Sandwich;
            data.sensitivity()?.parts(fit, stats, rank)?.total(rank)
        }
        CovMode::Bootstrap { replicates, seed } => {
            let (fit, edge) = fitted()?;
            bootstrap_covariance(fit, edge, part, replicates, seed)?
        }
    })
}

fn statistic_with(
    data: &EdgeData<'_>,
    part: &Partition,
    mode: CovMode,
    average_form: bool,
) -> Result<TestOutcome> {
    let stats = data.group_stats(part)?;
    let sigma = correlation_covariance(data, part, &stats, mode)?;
    let l = stats.num_leaves();
    let contrast = if average_form {
        average_matrix(&stats.masses())
    } else {
        difference_matrix(l)
    };
    let statistic = quadratic_statistic(&contrast, &stats.correlations(), &sigma, data.n())?;
    Ok(TestOutcome {
        statistic,
        df: l - 1,
        p_value: chi2_sf(l - 1, statistic),
        mode,
        penalty: None,
        partition: part.clone(),
    })
}

/// Statistic built on first-order differences of the group correlations.
pub fn statistic_fixed(
    data: &EdgeData<'_>,
    part: &Partition,
    mode: CovMode,
) -> Result<TestOutcome> {
    if part.len() < 2 {
        return Err(Error::Partition(
            "a partition needs at least two leaves".into(),
        ));
    }
    statistic_with(data, part, mode, false)
}

/// Statistic built on weighted differences to the average correlation;
/// numerically equal to [`statistic_fixed`].
pub fn statistic_avg_form(
    data: &EdgeData<'_>,
    part: &Partition,
    mode: CovMode,
) -> Result<TestOutcome> {
    if part.len() < 2 {
        return Err(Error::Partition(
            "a partition needs at least two leaves".into(),
        ));
    }
    statistic_with(data, part, mode, true)
}

/// Both quadratic forms from given correlations, masses and covariance.
pub fn forms_from_moments(
    r: &[f64],
    masses: &[f64],
    sigma: &DMatrix<f64>,
    n: usize,
) -> Result<(f64, f64)> {
    let a = quadratic_statistic(&difference_matrix(r.len()), r, sigma, n)?;
    let b = quadratic_statistic(&average_matrix(masses), r, sigma, n)?;
    Ok((a, b))
}
