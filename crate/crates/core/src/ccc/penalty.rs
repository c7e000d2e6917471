//! Penalised combination of the fixed-partition statistic with data-driven
//! alternatives.

use super::chi2::{chi2_quantile, chi2_sf};
use super::{PenaltyRecord, TestOutcome};
use serde::{Deserialize, Serialize};

/// Penalty `lambda_n = scale * n^(-exponent)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub scale: f64,
    pub exponent: f64,
}

impl Default for PenaltySpec {
    fn default() -> Self {
        PenaltySpec {
            scale: 1.0,
            exponent: 0.5,
        }
    }
}

impl PenaltySpec {
    pub fn lambda(&self, n: usize) -> f64 {
        self.scale * (n as f64).powf(-self.exponent)
    }
}

/// Smallest penalty for which the penalised and fixed-partition tests agree
/// on the given sample.
pub fn penalty_bound(t_gamma_max: f64, tau_crit: f64, n: usize) -> f64 {
    (t_gamma_max - tau_crit) / n as f64
}

/// `max(T0 + n lambda, T1, ..., TM) - n lambda`, referred to the chi-square
/// law of the fixed partition. `level` only enters the recorded bound.
pub fn combine_with_penalty(
    t0: &TestOutcome,
    alternatives: &[TestOutcome],
    n: usize,
    lambda_n: f64,
    level: f64,
) -> TestOutcome {
    let n_lambda = n as f64 * lambda_n;
    let mut best = t0.statistic + n_lambda;
    let mut used = &t0.partition;
    let mut from_alt = false;
    let mut t_gamma_max = t0.statistic;
    for alt in alternatives {
        if alt.statistic > best {
            best = alt.statistic;
            used = &alt.partition;
            from_alt = true;
        }
        t_gamma_max = t_gamma_max.max(alt.statistic);
    }
    let theta = if from_alt {
        best - n_lambda
    } else {
        t0.statistic
    };
    debug_assert!(theta >= t0.statistic - 1e-9 * t0.statistic.abs().max(1.0));
    let tau = chi2_quantile(t0.df, 1.0 - level);
    TestOutcome {
        statistic: theta,
        df: t0.df,
        p_value: chi2_sf(t0.df, theta),
        mode: t0.mode,
        penalty: Some(PenaltyRecord {
            n_lambda,
            t_gamma0: t0.statistic,
            t_gamma_max,
            b_n: penalty_bound(t_gamma_max, tau, n),
        }),
        partition: used.clone(),
    }
}
