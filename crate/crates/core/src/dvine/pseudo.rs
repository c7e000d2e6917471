use super::{DVineSpec, EdgeId, PseudoSample};
use crate::bivcop::{BivCopula, Given};
use crate::error::{Error, Result};

/// Rescaled empirical cdf of a column: `#{m : x_m <= x_k} / (n + 1)`. Tied
/// values share the largest rank of their group.
pub fn rank_column(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; n];
    let denom = n as f64 + 1.0;
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && x[order[end + 1]] == x[order[start]] {
            end += 1;
        }
        for &k in &order[start..=end] {
            out[k] = (end + 1) as f64 / denom;
        }
        start = end + 1;
    }
    out
}

/// Rank transform of every column of a data matrix given by columns.
pub fn rank_pseudo_obs(columns: &[Vec<f64>]) -> Result<PseudoSample> {
    let n = columns.first().map_or(0, Vec::len);
    if n < 2 {
        return Err(Error::Size(format!(
            "need at least 2 observations, got {n}"
        )));
    }
    if let Some(c) = columns.iter().flatten().find(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("non-finite value {c} in data")));
    }
    PseudoSample::from_columns(columns.iter().map(|c| rank_column(c)).collect())
}

/// Inputs of every edge of a D-vine on `m` consecutive variables for a single
/// observation, tree by tree.
#[derive(Debug, Clone)]
pub struct Triangle {
    m: usize,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl Triangle {
    pub fn new(m: usize) -> Self {
        let size = m * (m - 1) / 2;
        Triangle {
            m,
            left: vec![0.0; size],
            right: vec![0.0; size],
        }
    }

    #[inline]
    fn idx(&self, t: usize, p: usize) -> usize {
        // trees 1..t-1 hold (m-1) + ... + (m-t+1) edges
        (t - 1) * self.m - (t - 1) * t / 2 + p
    }

    /// Fills the table from the values `u` (length `m`) up to tree `top`,
    /// using `cop(t, p)` for the copula of the edge at relative position `p`.
    pub fn fill<F: Fn(usize, usize) -> BivCopula>(&mut self, u: &[f64], top: usize, cop: F) {
        for p in 0..self.m - 1 {
            let i = self.idx(1, p);
            self.left[i] = u[p];
            self.right[i] = u[p + 1];
        }
        self.propagate(2, top, cop);
    }

    /// Recomputes trees `from..=top` from the entries of tree `from - 1`.
    pub fn propagate<F: Fn(usize, usize) -> BivCopula>(&mut self, from: usize, top: usize, cop: F) {
        for t in from.max(2)..=top.min(self.m - 1) {
            for p in 0..self.m - t {
                let a = self.idx(t - 1, p);
                let b = self.idx(t - 1, p + 1);
                let l = cop(t - 1, p).hfunc_unchecked(self.left[a], self.right[a], Given::Second);
                let r =
                    cop(t - 1, p + 1).hfunc_unchecked(self.left[b], self.right[b], Given::First);
                let i = self.idx(t, p);
                self.left[i] = l;
                self.right[i] = r;
            }
        }
    }

    pub fn inputs(&self, t: usize, p: usize) -> (f64, f64) {
        let i = self.idx(t, p);
        (self.left[i], self.right[i])
    }
}

/// Inputs of `edge` computed with the true copulas of the lower trees.
pub fn true_ppits(
    spec: &DVineSpec,
    sample: &PseudoSample,
    edge: EdgeId,
) -> Result<(Vec<f64>, Vec<f64>)> {
    edge.check(spec.dim())?;
    let lo = edge.left_var();
    let m = edge.tree + 1;
    let mut tri = Triangle::new(m);
    let n = sample.n();
    let (mut x, mut y) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let mut row = vec![0.0; m];
    for k in 0..n {
        for (c, r) in row.iter_mut().enumerate() {
            *r = sample.column(lo + c)[k];
        }
        tri.fill(&row, edge.tree, |t, p| spec.copula(EdgeId::new(t, lo + p)));
        let (a, b) = tri.inputs(edge.tree, 0);
        x.push(a);
        y.push(b);
    }
    Ok((x, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_follow_rescaled_ecdf() {
        assert_eq!(rank_column(&[3.2, 1.1, 2.5]), vec![0.75, 0.25, 0.5]);
        let r = rank_column(&[0.11, 0.52, 0.33, 0.94]);
        assert_eq!(r, vec![0.2, 0.6, 0.4, 0.8]);
        assert_eq!(rank_column(&[1.0, 2.0, 1.0]), vec![0.5, 0.75, 0.5]);
        assert!(rank_pseudo_obs(&[vec![1.0]]).is_err());
    }
}
