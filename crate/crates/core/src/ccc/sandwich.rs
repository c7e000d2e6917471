//! Covariance of the group correlations when the pseudo-observations entering
//! an edge are produced by a fitted sub-vine on rank-transformed data.
//!
//! The correlation influence values are corrected for the estimation of the
//! sub-vine parameters (through the stacked estimating equations) and,
//! optionally, for the rank transformation of every column the edge depends
//! on. Derivatives of the pseudo-observation maps and of the sub-vine scores
//! are central finite differences of a per-observation forward pass.

use super::groups::{influence_covariance, GroupStats};
use crate::bivcop::BivCopula;
use crate::dvine::{EdgeId, FittedTrees, Triangle};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use rayon::prelude::*;

const THETA_STEP: f64 = 1e-5;
const COLUMN_STEP: f64 = 1e-4;

/// Covariance of the correlation vector split into the oracle part, the
/// parameter-estimation correction and the rank correction.
#[derive(Debug, Clone)]
pub struct SandwichParts {
    pub star: DMatrix<f64>,
    pub pvc: DMatrix<f64>,
    pub rank: DMatrix<f64>,
}

impl SandwichParts {
    pub fn total(&self, include_rank_term: bool) -> DMatrix<f64> {
        if include_rank_term {
            &self.star + &self.pvc + &self.rank
        } else {
            &self.star + &self.pvc
        }
    }
}

/// Sub-vine below an edge: the copulas of trees `1..tree` on the variables
/// the edge depends on, with the non-independence ones carrying a parameter.
struct SubVine {
    top: usize,
    m: usize,
    copulas: Vec<Vec<BivCopula>>,
    // (tree, relative position) of every edge with a parameter
    params: Vec<(usize, usize)>,
}

impl SubVine {
    fn new(fit: &FittedTrees, edge: EdgeId) -> Result<Self> {
        let top = edge.tree;
        let m = top + 1;
        let mut copulas = Vec::with_capacity(top.saturating_sub(1));
        let mut params = Vec::new();
        for t in 1..top {
            let mut row = Vec::with_capacity(m - t);
            for p in 0..m - t {
                let c = fit.copula(EdgeId::new(t, edge.pos + p))?;
                if !c.is_independence() {
                    params.push((t, p));
                }
                row.push(c);
            }
            copulas.push(row);
        }
        Ok(SubVine {
            top,
            m,
            copulas,
            params,
        })
    }

    fn cop(&self, t: usize, p: usize) -> BivCopula {
        self.copulas[t - 1][p]
    }

    fn scores(&self, tri: &Triangle, out: &mut [f64]) {
        for (s, &(t, p)) in out.iter_mut().zip(&self.params) {
            let (a, b) = tri.inputs(t, p);
            *s = self.cop(t, p).score_unchecked(a, b);
        }
    }

    /// Steps `(minus, plus)` for a central difference in the parameter of
    /// edge `(t, p)`; falls back to a one-sided step at the boundary.
    fn theta_steps(&self, t: usize, p: usize) -> (BivCopula, BivCopula, f64) {
        let c = self.cop(t, p);
        let h = THETA_STEP * c.theta.abs().max(1.0);
        let shifted = |v: f64| BivCopula::new(c.tag, v).ok();
        match (shifted(c.theta - h), shifted(c.theta + h)) {
            (Some(lo), Some(hi)) => (lo, hi, 2.0 * h),
            (None, Some(hi)) => (c, hi, h),
            (Some(lo), None) => (lo, c, h),
            (None, None) => (c, c, f64::INFINITY),
        }
    }
}

/// Per-observation derivatives of the edge inputs and sub-vine scores.
struct ObsDerivs {
    scores: Vec<f64>,
    // derivatives with respect to the sub-vine parameters
    dx_theta: Vec<f64>,
    dy_theta: Vec<f64>,
    // dscore_theta[e * P + f] = d score_e / d theta_f
    dscore_theta: Vec<f64>,
    // derivatives with respect to the input columns
    dx_col: Vec<f64>,
    dy_col: Vec<f64>,
    // dscore_col[c * P + e] = d score_e / d u_c
    dscore_col: Vec<f64>,
}

fn observation_derivs(sub: &SubVine, u: &[f64], with_columns: bool) -> ObsDerivs {
    let np = sub.params.len();
    let m = sub.m;
    let top = sub.top;
    let mut base = Triangle::new(m);
    base.fill(u, top, |t, p| sub.cop(t, p));
    let mut scores = vec![0.0; np];
    sub.scores(&base, &mut scores);

    let mut dx_theta = vec![0.0; np];
    let mut dy_theta = vec![0.0; np];
    let mut dscore_theta = vec![0.0; np * np];
    let (mut s_lo, mut s_hi) = (vec![0.0; np], vec![0.0; np]);
    let mut tri = base.clone();
    for (f, &(tf, pf)) in sub.params.iter().enumerate() {
        let (lo, hi, width) = sub.theta_steps(tf, pf);
        if !width.is_finite() {
            continue;
        }
        let mut eval = |cf: BivCopula, out: &mut [f64]| {
            tri.clone_from(&base);
            let pick = |t: usize, p: usize| {
                if (t, p) == (tf, pf) {
                    cf
                } else {
                    sub.cop(t, p)
                }
            };
            tri.propagate(tf + 1, top, pick);
            for (s, &(t, p)) in out.iter_mut().zip(&sub.params) {
                let (a, b) = tri.inputs(t, p);
                *s = pick(t, p).score_unchecked(a, b);
            }
            tri.inputs(top, 0)
        };
        let (xl, yl) = eval(lo, &mut s_lo);
        let (xh, yh) = eval(hi, &mut s_hi);
        dx_theta[f] = (xh - xl) / width;
        dy_theta[f] = (yh - yl) / width;
        for e in 0..np {
            dscore_theta[e * np + f] = (s_hi[e] - s_lo[e]) / width;
        }
    }

    let (mut dx_col, mut dy_col, mut dscore_col) = (Vec::new(), Vec::new(), Vec::new());
    if with_columns {
        dx_col = vec![0.0; m];
        dy_col = vec![0.0; m];
        dscore_col = vec![0.0; m * np];
        let mut v = u.to_vec();
        for c in 0..m {
            let h = COLUMN_STEP.min(u[c] / 2.0).min((1.0 - u[c]) / 2.0);
            let mut eval = |val: f64, out: &mut [f64]| {
                v[c] = val;
                tri.fill(&v, top, |t, p| sub.cop(t, p));
                sub.scores(&tri, out);
                tri.inputs(top, 0)
            };
            let (xl, yl) = eval(u[c] - h, &mut s_lo);
            let (xh, yh) = eval(u[c] + h, &mut s_hi);
            v[c] = u[c];
            dx_col[c] = (xh - xl) / (2.0 * h);
            dy_col[c] = (yh - yl) / (2.0 * h);
            for e in 0..np {
                dscore_col[c * np + e] = (s_hi[e] - s_lo[e]) / (2.0 * h);
            }
        }
    }
    ObsDerivs {
        scores,
        dx_theta,
        dy_theta,
        dscore_theta,
        dx_col,
        dy_col,
        dscore_col,
    }
}

/// Partition-independent derivatives for one edge: per-observation
/// sensitivities of its inputs and of the sub-vine scores, and the mean
/// score Jacobian of the sub-vine.
pub struct Sensitivity {
    edge: EdgeId,
    np: usize,
    m: usize,
    with_columns: bool,
    derivs: Vec<ObsDerivs>,
    // LU of the transposed score Jacobian; None without parameters
    g_ss_t: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl std::fmt::Debug for Sensitivity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Sensitivity")
            .field("edge", &self.edge)
            .field("params", &self.np)
            .field("with_columns", &self.with_columns)
            .finish()
    }
}

impl Sensitivity {
    /// Column derivatives are only computed when `with_columns` is set; they
    /// are needed for the rank correction.
    pub fn compute(fit: &FittedTrees, edge: EdgeId, with_columns: bool) -> Result<Self> {
        edge.check(fit.dim())?;
        fit.compute_ppits(edge)?;
        let sub = SubVine::new(fit, edge)?;
        let np = sub.params.len();
        let m = sub.m;
        let n = fit.n();
        let cols: Vec<&[f64]> = (0..m).map(|c| fit.sample().column(edge.pos + c)).collect();
        let mut derivs: Vec<ObsDerivs> = (0..n)
            .into_par_iter()
            .map(|k| {
                let u: Vec<f64> = cols.iter().map(|c| c[k]).collect();
                observation_derivs(&sub, &u, with_columns)
            })
            .collect();
        let mut g_ss_t = None;
        if np > 0 {
            let mut g = DMatrix::zeros(np, np);
            for dk in derivs.iter_mut() {
                for e in 0..np {
                    for f in 0..np {
                        g[(f, e)] += dk.dscore_theta[e * np + f];
                    }
                }
                dk.dscore_theta = Vec::new();
            }
            g /= n as f64;
            let sv = g.singular_values();
            if !(sv.min() > 0.0) || sv.max() / sv.min() > 1e12 {
                return Err(
                    Error::Numeric("singular score Jacobian of the sub-vine".into()).on_edge(edge),
                );
            }
            g_ss_t = Some(g.lu());
        }
        Ok(Sensitivity {
            edge,
            np,
            m,
            with_columns,
            derivs,
            g_ss_t,
        })
    }

    pub fn edge(&self) -> EdgeId {
        self.edge
    }

    pub fn has_columns(&self) -> bool {
        self.with_columns
    }

    /// Oracle, parameter-estimation and rank parts of the correlation
    /// covariance for group statistics `stats` of the same fit and edge.
    ///
    /// Leaf membership is held fixed when differentiating; the derivative of
    /// the estimating equations with respect to the leaf masses is dropped
    /// since its expectation vanishes under the null.
    pub fn parts(
        &self,
        fit: &FittedTrees,
        stats: &GroupStats,
        include_rank_term: bool,
    ) -> Result<SandwichParts> {
        if include_rank_term && !self.with_columns {
            return Err(Error::State(
                "sensitivities were computed without column derivatives".into(),
            ));
        }
        let (x, y) = fit.compute_ppits(self.edge)?;
        let n = fit.n();
        if stats.n != n || self.derivs.len() != n {
            return Err(Error::Size("group statistics do not match the fit".into()));
        }
        let (np, nl) = (self.np, stats.num_leaves());
        let psi = stats.influence(x, y);
        let star = influence_covariance(&psi);
        let q: Vec<Option<(usize, f64, f64)>> = (0..n)
            .map(|k| {
                stats.labels[k].map(|l| {
                    let (qx, qy) = stats.leaves[l].influence_dxy(x[k], y[k]);
                    (l, qx, qy)
                })
            })
            .collect();

        // projection of the sub-vine scores onto the correlation equations
        let mut proj = DMatrix::zeros(nl, np);
        if let Some(lu) = &self.g_ss_t {
            let mut cross = DMatrix::zeros(nl, np);
            for (k, dk) in self.derivs.iter().enumerate() {
                if let Some((l, qx, qy)) = q[k] {
                    for f in 0..np {
                        cross[(l, f)] += qx * dk.dx_theta[f] + qy * dk.dy_theta[f];
                    }
                }
            }
            cross /= n as f64;
            // proj = cross * G^{-1}, i.e. G^T proj^T = cross^T
            let t = lu.solve(&cross.transpose()).ok_or_else(|| {
                Error::Numeric("singular score Jacobian of the sub-vine".into()).on_edge(self.edge)
            })?;
            proj = t.transpose();
        }

        let mut psi_a = psi;
        for (k, dk) in self.derivs.iter().enumerate() {
            for (l, row) in psi_a.iter_mut().enumerate() {
                let corr: f64 = (0..np).map(|e| proj[(l, e)] * dk.scores[e]).sum();
                row[k] -= corr;
            }
        }
        let cov_a = influence_covariance(&psi_a);

        let cov_b = if include_rank_term {
            let mut psi_b = psi_a.clone();
            let mut dvals = vec![0.0; n];
            for c in 0..self.m {
                let col = fit.sample().column(self.edge.pos + c);
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
                for (l, row) in psi_b.iter_mut().enumerate() {
                    for (k, dk) in self.derivs.iter().enumerate() {
                        let mut d = -(0..np)
                            .map(|e| proj[(l, e)] * dk.dscore_col[c * np + e])
                            .sum::<f64>();
                        if let Some((lk, qx, qy)) = q[k] {
                            if lk == l {
                                d += qx * dk.dx_col[c] + qy * dk.dy_col[c];
                            }
                        }
                        dvals[k] = d;
                    }
                    add_rank_correction(col, &order, &dvals, row);
                }
            }
            influence_covariance(&psi_b)
        } else {
            cov_a.clone()
        };

        let to_mat = |v: &[Vec<f64>]| DMatrix::from_fn(nl, nl, |a, b| v[a][b]);
        let (star, a, b) = (to_mat(&star), to_mat(&cov_a), to_mat(&cov_b));
        Ok(SandwichParts {
            pvc: &a - &star,
            rank: &b - &a,
            star,
        })
    }
}

/// Oracle, parameter-estimation and rank parts of the correlation covariance
/// for `edge`, whose group statistics over a partition are `stats`.
pub fn sandwich_parts(
    fit: &FittedTrees,
    edge: EdgeId,
    stats: &GroupStats,
    include_rank_term: bool,
) -> Result<SandwichParts> {
    Sensitivity::compute(fit, edge, include_rank_term)?.parts(fit, stats, include_rank_term)
}

/// Adds `w(k) = (1/n) sum_m d(m) (1{v_k <= v_m} - v_m)` to `row`, using the
/// ordering of `v`.
fn add_rank_correction(v: &[f64], order: &[usize], d: &[f64], row: &mut [f64]) {
    let n = v.len();
    let offset: f64 = d.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    // suffix[i] = sum of d over order[i..]
    let mut suffix = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + d[order[i]];
    }
    let mut i = 0;
    while i < n {
        // observations tied with order[i] all count each other
        let mut j = i;
        while j + 1 < n && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        for &k in &order[i..=j] {
            row[k] += (suffix[i] - offset) / n as f64;
        }
        i = j + 1;
    }
}

/// Full correlation covariance for `edge` over `part`.
pub fn sandwich_covariance(
    fit: &FittedTrees,
    edge: EdgeId,
    part: &super::Partition,
    include_rank_term: bool,
) -> Result<DMatrix<f64>> {
    let (x, y) = fit.compute_ppits(edge)?;
    let cond: Vec<&[f64]> = edge
        .conditioning()
        .map(|c| fit.sample().column(c))
        .collect();
    let stats = super::group_stats(x, y, &cond, part)?;
    Ok(sandwich_parts(fit, edge, &stats, include_rank_term)?.total(include_rank_term))
}
