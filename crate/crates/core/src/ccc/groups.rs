//! Per-leaf moments, correlations and their influence values.

use super::partition::Partition;
use crate::error::{Error, Result};
use nalgebra::{Matrix5, Vector5};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct LeafStats {
    pub count: usize,
    pub mass: f64,
    pub mean_x: f64,
    pub mean_y: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub cov: f64,
    pub corr: f64,
    /// Fifth row of the inverse Jacobian of the leaf's moment equations.
    #[serde(skip)]
    pub(crate) weights: [f64; 5],
}

impl LeafStats {
    /// Moment equations evaluated at one observation.
    pub(crate) fn moments(&self, x: f64, y: f64) -> [f64; 5] {
        let (dx, dy) = (x - self.mean_x, y - self.mean_y);
        let s = (self.var_x * self.var_y).powf(-0.5);
        [
            self.mean_x - x,
            self.mean_y - y,
            self.var_x - dx * dx,
            self.var_y - dy * dy,
            self.corr - dx * dy * s,
        ]
    }

    /// Derivatives of the moment equations with respect to the observation.
    pub(crate) fn moments_dxy(&self, x: f64, y: f64) -> ([f64; 5], [f64; 5]) {
        let (dx, dy) = (x - self.mean_x, y - self.mean_y);
        let s = (self.var_x * self.var_y).powf(-0.5);
        (
            [-1.0, 0.0, -2.0 * dx, 0.0, -dy * s],
            [0.0, -1.0, 0.0, -2.0 * dy, -dx * s],
        )
    }

    fn moments_jacobian(&self, x: f64, y: f64) -> Matrix5<f64> {
        let (dx, dy) = (x - self.mean_x, y - self.mean_y);
        let s = (self.var_x * self.var_y).powf(-0.5);
        let p = dx * dy * s;
        #[rustfmt::skip]
        let m = Matrix5::new(
            1.0, 0.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0, 0.0,
            2.0 * dx, 0.0, 1.0, 0.0, 0.0,
            0.0, 2.0 * dy, 0.0, 1.0, 0.0,
            dy * s, dx * s, 0.5 * p / self.var_x, 0.5 * p / self.var_y, 1.0,
        );
        m
    }

    /// Influence of one in-leaf observation on the leaf correlation.
    pub(crate) fn influence(&self, x: f64, y: f64) -> f64 {
        let h = self.moments(x, y);
        self.weights.iter().zip(h).map(|(a, b)| a * b).sum::<f64>() / self.mass
    }

    /// Derivatives of [`influence`](Self::influence) with respect to `x` and `y`.
    pub(crate) fn influence_dxy(&self, x: f64, y: f64) -> (f64, f64) {
        let (hx, hy) = self.moments_dxy(x, y);
        let dot = |v: [f64; 5]| self.weights.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        (dot(hx) / self.mass, dot(hy) / self.mass)
    }
}

#[derive(Debug, Clone)]
pub struct GroupStats {
    pub n: usize,
    pub leaves: Vec<LeafStats>,
    /// Leaf of every observation.
    pub labels: Vec<Option<usize>>,
}

impl GroupStats {
    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn correlations(&self) -> Vec<f64> {
        self.leaves.iter().map(|l| l.corr).collect()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.leaves.iter().map(|l| l.mass).collect()
    }

    /// Influence values `psi[l][k]` of every observation on every leaf
    /// correlation; zero outside the leaf.
    pub fn influence(&self, x: &[f64], y: &[f64]) -> Vec<Vec<f64>> {
        let mut psi = vec![vec![0.0; self.n]; self.leaves.len()];
        for (k, lab) in self.labels.iter().enumerate() {
            if let Some(l) = *lab {
                psi[l][k] = self.leaves[l].influence(x[k], y[k]);
            }
        }
        psi
    }
}

/// Group moments, masses and correlations of `(x, y)` over the leaves of
/// `part`, with divisor `n * mass` throughout.
pub fn group_stats(x: &[f64], y: &[f64], cond: &[&[f64]], part: &Partition) -> Result<GroupStats> {
    let n = x.len();
    if y.len() != n || cond.iter().any(|c| c.len() != n) {
        return Err(Error::Size(
            "x, y and conditioning columns differ in length".into(),
        ));
    }
    let labels = part.assign(cond)?;
    group_stats_labelled(x, y, labels, part.len())
}

pub(crate) fn group_stats_labelled(
    x: &[f64],
    y: &[f64],
    labels: Vec<Option<usize>>,
    num_leaves: usize,
) -> Result<GroupStats> {
    let n = x.len();
    let mut leaves = Vec::with_capacity(num_leaves);
    for l in 0..num_leaves {
        let members: Vec<usize> = (0..n).filter(|&k| labels[k] == Some(l)).collect();
        let count = members.len();
        if count < 2 {
            return Err(Error::Partition(format!(
                "leaf {l} has {count} observations"
            )));
        }
        let nl = count as f64;
        let mean_x = members.iter().map(|&k| x[k]).sum::<f64>() / nl;
        let mean_y = members.iter().map(|&k| y[k]).sum::<f64>() / nl;
        let (mut var_x, mut var_y, mut cov) = (0.0, 0.0, 0.0);
        for &k in &members {
            let (dx, dy) = (x[k] - mean_x, y[k] - mean_y);
            var_x += dx * dx;
            var_y += dy * dy;
            cov += dx * dy;
        }
        var_x /= nl;
        var_y /= nl;
        cov /= nl;
        let tiny = 1e-14 * (mean_x.abs() + mean_y.abs() + 1.0).powi(2);
        if var_x <= tiny || var_y <= tiny {
            return Err(Error::Degenerate(format!("leaf {l} has zero variance")));
        }
        let corr = (cov / (var_x * var_y).sqrt()).clamp(-1.0, 1.0);
        let mut leaf = LeafStats {
            count,
            mass: nl / n as f64,
            mean_x,
            mean_y,
            var_x,
            var_y,
            cov,
            corr,
            weights: [0.0; 5],
        };
        let jac = members.iter().fold(Matrix5::zeros(), |acc, &k| {
            acc + leaf.moments_jacobian(x[k], y[k])
        }) / nl;
        let a = jac
            .transpose()
            .lu()
            .solve(&Vector5::new(0.0, 0.0, 0.0, 0.0, 1.0))
            .ok_or_else(|| Error::Numeric(format!("singular moment Jacobian in leaf {l}")))?;
        leaf.weights = [a[0], a[1], a[2], a[3], a[4]];
        leaves.push(leaf);
    }
    Ok(GroupStats { n, leaves, labels })
}

/// Covariance (divisor `n`) of the rows of `psi`.
pub fn influence_covariance(psi: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let l = psi.len();
    let n = psi.first().map_or(0, |p| p.len()) as f64;
    let means: Vec<f64> = psi.iter().map(|p| p.iter().sum::<f64>() / n).collect();
    let mut out = vec![vec![0.0; l]; l];
    for a in 0..l {
        for b in a..l {
            let c = psi[a]
                .iter()
                .zip(&psi[b])
                .map(|(u, v)| (u - means[a]) * (v - means[b]))
                .sum::<f64>()
                / n;
            out[a][b] = c;
            out[b][a] = c;
        }
    }
    out
}

/// Diagonal entry `l` of the oracle correlation covariance.
pub fn corr_variance_star(stats: &GroupStats, x: &[f64], y: &[f64], l: usize) -> f64 {
    let leaf = &stats.leaves[l];
    let n = stats.n as f64;
    stats
        .labels
        .iter()
        .enumerate()
        .filter(|(_, lab)| **lab == Some(l))
        .map(|(k, _)| leaf.influence(x[k], y[k]).powi(2))
        .sum::<f64>()
        / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccc::partition::{Axis, Partition};
    use crate::stats::pearson;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn whole() -> Partition {
        Partition::new(vec![vec![]])
    }

    #[test]
    fn single_leaf_is_full_sample() {
        let x = [0.1, 0.4, 0.6, 0.9];
        let y = [0.2, 0.3, 0.9, 0.8];
        let c = [0.5; 4];
        let s = group_stats(&x, &y, &[&c], &whole()).unwrap();
        assert_eq!(s.leaves[0].mass, 1.0);
        // brute evaluation of the moment formulas
        let mx = (0.1 + 0.4 + 0.6 + 0.9) / 4.0;
        let my = (0.2 + 0.3 + 0.9 + 0.8) / 4.0;
        let sxy: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - mx) * (b - my))
            .sum::<f64>()
            / 4.0;
        let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum::<f64>() / 4.0;
        let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum::<f64>() / 4.0;
        assert!((s.leaves[0].corr - sxy / (sxx * syy).sqrt()).abs() < 1e-12);
        assert!((s.leaves[0].corr - pearson(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn constant_leaf_is_degenerate() {
        let x = [0.3; 5];
        let y = [0.1, 0.2, 0.3, 0.4, 0.5];
        let c = [0.5; 5];
        assert!(matches!(
            group_stats(&x, &y, &[&c], &whole()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn empty_leaf_is_a_partition_error() {
        let x = [0.1, 0.2, 0.3];
        let c = [0.1, 0.2, 0.3];
        let p = Partition::split(Axis::Var(0), 0.9);
        assert!(matches!(
            group_stats(&x, &x, &[&c], &p),
            Err(Error::Partition(_))
        ));
    }

    fn gaussian_pair(rng: &mut ChaCha8Rng, n: usize, rho: f64) -> (Vec<f64>, Vec<f64>) {
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let a = std_normal(rng);
            let b = std_normal(rng);
            x.push(a);
            y.push(rho * a + (1.0 - rho * rho).sqrt() * b);
        }
        (x, y)
    }

    fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
        crate::special::norm_quantile(rng.gen_range(1e-12..1.0))
    }

    #[test]
    fn gaussian_variance_matches_classical_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = 0.5;
        let (x, y) = gaussian_pair(&mut rng, 40_000, rho);
        let c: Vec<f64> = (0..x.len())
            .map(|k| (k as f64 + 0.5) / x.len() as f64)
            .collect();
        let s = group_stats(&x, &y, &[&c], &whole()).unwrap();
        let v = corr_variance_star(&s, &x, &y, 0);
        let target = (1.0f64 - rho * rho).powi(2);
        assert!((v / target - 1.0).abs() < 0.1, "{v} vs {target}");
        // the weights reduce to the closed form at the estimate
        let w = s.leaves[0].weights;
        assert!(w[0].abs() < 1e-10 && w[1].abs() < 1e-10);
        assert!((w[2] + 0.5 * s.leaves[0].corr / s.leaves[0].var_x).abs() < 1e-10);
        assert!((w[4] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_mass_doubles_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (x, y) = gaussian_pair(&mut rng, 20_000, 0.3);
        let n = x.len();
        let c: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect();
        let s = group_stats(&x, &y, &[&c], &Partition::split(Axis::Var(0), 0.5)).unwrap();
        let v0 = corr_variance_star(&s, &x, &y, 0);
        let v1 = corr_variance_star(&s, &x, &y, 1);
        let full = group_stats(&x, &y, &[&c], &whole()).unwrap();
        let vf = corr_variance_star(&full, &x, &y, 0);
        assert!((v0 / v1 - 1.0).abs() < 0.15);
        assert!(((v0 + v1) / 2.0 / vf - 2.0).abs() < 0.3);
        // the influence covariance is diagonal
        let cov = influence_covariance(&s.influence(&x, &y));
        assert!(cov[0][1].abs() < 1e-12);
        assert!((cov[0][0] - v0).abs() < 1e-12);
    }
}
