use super::{EdgeId, FamilyGrid, PseudoSample};
use crate::bivcop::{BivCopula, Family, FamilyTag, Given};
use crate::error::{Error, Result};
use crate::special::brent_minimize;

/// Maximum-likelihood fit of one pair copula. Returns the copula and its
/// log-likelihood gain over independence. Fits whose gain is below `1e-6 n`
/// are replaced by the independence copula.
pub fn fit_pair(x: &[f64], y: &[f64], tag: FamilyTag) -> Result<(BivCopula, f64)> {
    if tag.family == Family::Independence {
        return Ok((BivCopula::independence(), 0.0));
    }
    let n = x.len();
    let loglik = |theta: f64| -> f64 {
        let cop = BivCopula { tag, theta };
        x.iter()
            .zip(y)
            .map(|(&a, &b)| cop.log_density_unchecked(a, b))
            .sum()
    };
    let (lo, hi) = tag.family.fit_range();
    let (mut theta, neg) = brent_minimize(|t| -loglik(t), lo, hi, 1e-8, 500);
    if !neg.is_finite() {
        return Err(Error::Numeric(format!(
            "{tag} log-likelihood is not finite"
        )));
    }
    theta = polish(x, y, tag, theta, lo, hi);
    let gain = loglik(theta);
    if !gain.is_finite() {
        return Err(Error::Numeric(format!(
            "{tag} log-likelihood is not finite at {theta}"
        )));
    }
    match BivCopula::new(tag, theta) {
        Ok(cop) if gain >= 1e-6 * n as f64 => Ok((cop, gain)),
        _ => Ok((BivCopula::independence(), 0.0)),
    }
}

/// Newton steps on the mean score to push the first-order condition well
/// below the Brent tolerance.
fn polish(x: &[f64], y: &[f64], tag: FamilyTag, mut theta: f64, lo: f64, hi: f64) -> f64 {
    let mean_score = |t: f64| {
        let cop = BivCopula { tag, theta: t };
        x.iter()
            .zip(y)
            .map(|(&a, &b)| cop.score_unchecked(a, b))
            .sum::<f64>()
            / x.len() as f64
    };
    for _ in 0..4 {
        let s = mean_score(theta);
        if !s.is_finite() || s.abs() < 1e-12 {
            break;
        }
        let h = 1e-5 * theta.abs().max(1.0);
        if theta - h < lo || theta + h > hi {
            break;
        }
        let slope = (mean_score(theta + h) - mean_score(theta - h)) / (2.0 * h);
        if !(slope < 0.0) {
            break;
        }
        let next = theta - s / slope;
        if !(next > lo && next < hi) || (next - theta).abs() > 0.1 * theta.abs().max(0.1) {
            break;
        }
        let s_next = mean_score(next);
        if !(s_next.abs() < s.abs()) {
            break;
        }
        theta = next;
    }
    theta
}

/// Stepwise fit of the first trees of a D-vine together with the inputs of
/// every edge one tree beyond the fitted ones.
#[derive(Debug, Clone)]
pub struct FittedTrees {
    sample: PseudoSample,
    families: FamilyGrid,
    copulas: Vec<Vec<BivCopula>>,
    loglik: Vec<Vec<f64>>,
    // inputs[t - 1][p] = (left, right) columns of edge (t, p)
    inputs: Vec<Vec<(Vec<f64>, Vec<f64>)>>,
}

/// Fits trees `1..=up_to_tree` edge by edge.
pub fn stepwise_fit(
    sample: &PseudoSample,
    families: &FamilyGrid,
    up_to_tree: usize,
) -> Result<FittedTrees> {
    let mut fit = FittedTrees::new(sample.clone(), families.clone())?;
    while fit.fitted_trees() < up_to_tree {
        fit.fit_next_tree()?;
    }
    Ok(fit)
}

impl FittedTrees {
    /// Starts with no fitted tree; only tree-1 inputs are available.
    pub fn new(sample: PseudoSample, families: FamilyGrid) -> Result<Self> {
        let d = sample.dim();
        if d < 2 {
            return Err(Error::Size("need at least two variables".into()));
        }
        if families.dim() != d {
            return Err(Error::Size(format!(
                "family grid is for d={}, sample has d={d}",
                families.dim()
            )));
        }
        let first = (0..d - 1)
            .map(|p| (sample.column(p).to_vec(), sample.column(p + 1).to_vec()))
            .collect();
        Ok(FittedTrees {
            sample,
            families,
            copulas: Vec::new(),
            loglik: Vec::new(),
            inputs: vec![first],
        })
    }

    pub fn dim(&self) -> usize {
        self.sample.dim()
    }

    pub fn n(&self) -> usize {
        self.sample.n()
    }

    pub fn sample(&self) -> &PseudoSample {
        &self.sample
    }

    pub fn families(&self) -> &FamilyGrid {
        &self.families
    }

    pub fn fitted_trees(&self) -> usize {
        self.copulas.len()
    }

    /// Fits the next tree and propagates its inputs to the tree after it.
    pub fn fit_next_tree(&mut self) -> Result<()> {
        let d = self.dim();
        let t = self.fitted_trees() + 1;
        if t >= d {
            return Err(Error::State(format!(
                "all {} trees are already fitted",
                d - 1
            )));
        }
        let mut cops = Vec::with_capacity(d - t);
        let mut gains = Vec::with_capacity(d - t);
        for (p, (x, y)) in self.inputs[t - 1].iter().enumerate() {
            let edge = EdgeId::new(t, p);
            let (cop, gain) =
                fit_pair(x, y, self.families.get(edge)).map_err(|e| e.on_edge(edge))?;
            cops.push(cop);
            gains.push(gain);
        }
        if t + 1 < d {
            let prev = &self.inputs[t - 1];
            let next = (0..d - t - 1)
                .map(|p| {
                    let (l0, r0) = &prev[p];
                    let (l1, r1) = &prev[p + 1];
                    let left = l0
                        .iter()
                        .zip(r0)
                        .map(|(&a, &b)| cops[p].hfunc_unchecked(a, b, Given::Second))
                        .collect();
                    let right = l1
                        .iter()
                        .zip(r1)
                        .map(|(&a, &b)| cops[p + 1].hfunc_unchecked(a, b, Given::First))
                        .collect();
                    (left, right)
                })
                .collect();
            self.inputs.push(next);
        }
        self.copulas.push(cops);
        self.loglik.push(gains);
        Ok(())
    }

    pub fn copula(&self, edge: EdgeId) -> Result<BivCopula> {
        self.copulas
            .get(edge.tree.wrapping_sub(1))
            .and_then(|row| row.get(edge.pos))
            .copied()
            .ok_or_else(|| Error::State(format!("edge {edge} has not been fitted")))
    }

    /// Log-likelihood gain of a fitted edge over independence.
    pub fn loglik(&self, edge: EdgeId) -> Result<f64> {
        self.copula(edge)?;
        Ok(self.loglik[edge.tree - 1][edge.pos])
    }

    /// Pseudo-observations `(left, right)` entering `edge`; available once
    /// every tree below it is fitted.
    pub fn compute_ppits(&self, edge: EdgeId) -> Result<(&[f64], &[f64])> {
        edge.check(self.dim())?;
        let (l, r) = self
            .inputs
            .get(edge.tree - 1)
            .and_then(|row| row.get(edge.pos))
            .ok_or_else(|| Error::State(format!("trees below {edge} are not fitted")))?;
        Ok((l, r))
    }

    /// Per-observation scores of a fitted edge at its estimate; zeros for an
    /// independence edge.
    pub fn scores(&self, edge: EdgeId) -> Result<Vec<f64>> {
        let cop = self.copula(edge)?;
        let (x, y) = self.compute_ppits(edge)?;
        Ok(x.iter()
            .zip(y)
            .map(|(&a, &b)| cop.score_unchecked(a, b))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dvine::{simulate, DVineSpec};

    #[test]
    fn single_clayton_fit() {
        let cop = BivCopula::new(FamilyTag::CLAYTON, 2.0).unwrap();
        let s = simulate(&DVineSpec::uniform(2, cop), 5000, 5).unwrap();
        let (fit, gain) = fit_pair(s.column(0), s.column(1), FamilyTag::CLAYTON).unwrap();
        assert!((1.85..=2.15).contains(&fit.theta), "{}", fit.theta);
        assert!(gain > 0.0);
        let mean: f64 = s
            .column(0)
            .iter()
            .zip(s.column(1))
            .map(|(&a, &b)| fit.score_unchecked(a, b))
            .sum::<f64>()
            / 5000.0;
        assert!(mean.abs() < 1e-6);
    }

    #[test]
    fn frank_near_independence() {
        let s = simulate(&DVineSpec::independence(2), 5000, 9).unwrap();
        let (fit, _) = fit_pair(s.column(0), s.column(1), FamilyTag::FRANK).unwrap();
        assert!(fit.theta.abs() < 0.2);
    }

    #[test]
    fn ppits_before_fit_are_state_errors() {
        let s = simulate(&DVineSpec::independence(4), 20, 1).unwrap();
        let fit = FittedTrees::new(s, FamilyGrid::uniform(4, FamilyTag::CLAYTON)).unwrap();
        assert!(fit.compute_ppits(EdgeId::new(1, 2)).is_ok());
        assert!(matches!(
            fit.compute_ppits(EdgeId::new(2, 0)),
            Err(Error::State(_))
        ));
        assert!(matches!(
            fit.copula(EdgeId::new(1, 0)),
            Err(Error::State(_))
        ));
    }
}
