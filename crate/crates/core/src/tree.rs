//! Greedy decision-tree search for the partition of the conditioning support
//! that maximises the two-group correlation statistic.

use crate::ccc::{corr_variance_star, quantile, Axis, Condition, GroupStats, Leaf, Op, Partition};
use crate::error::Result;
use serde::{Deserialize, Serialize};

const QUARTILES: [f64; 3] = [0.25, 0.5, 0.75];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// Maximum depth.
    pub j_max: usize,
    /// Minimum number of observations in every leaf.
    pub min_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            j_max: 2,
            min_leaf: 100,
        }
    }
}

/// A node of the tree: its path from the root (`false` = lower child), the
/// conditions defining it and its members.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeLeaf {
    pub path: Vec<bool>,
    pub conditions: Leaf,
    pub members: Vec<usize>,
}

impl TreeLeaf {
    pub fn root(n: usize) -> Self {
        TreeLeaf {
            path: Vec::new(),
            conditions: Vec::new(),
            members: (0..n).collect(),
        }
    }

    fn children(&self, split: &SplitCandidate, cond: &[&[f64]]) -> (TreeLeaf, TreeLeaf) {
        let (lo, hi): (Vec<usize>, Vec<usize>) = self
            .members
            .iter()
            .partition(|&&k| split.axis.value(cond, k) <= split.threshold);
        let child = |op, members, right| {
            let mut conditions = self.conditions.clone();
            conditions.push(Condition {
                axis: split.axis,
                op,
                threshold: split.threshold,
            });
            let mut path = self.path.clone();
            path.push(right);
            TreeLeaf {
                path,
                conditions,
                members,
            }
        };
        (child(Op::Le, lo, false), child(Op::Gt, hi, true))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    pub axis: Axis,
    pub quantile: f64,
    pub threshold: f64,
}

/// Quartile splits of every conditioning column and, with two or more
/// columns, of their mean, computed on the leaf's members. Leaves with fewer
/// than `4 * min_leaf` members only try medians. Candidates leaving fewer
/// than `min_leaf` members on either side are dropped, as are repeated
/// thresholds on the same axis.
pub fn split_candidates(leaf: &TreeLeaf, cond: &[&[f64]], min_leaf: usize) -> Vec<SplitCandidate> {
    let size = leaf.members.len();
    if size < 2 * min_leaf.max(1) {
        return Vec::new();
    }
    let qs: &[f64] = if size < 4 * min_leaf {
        &[0.5]
    } else {
        &QUARTILES
    };
    let mut axes: Vec<Axis> = (0..cond.len()).map(Axis::Var).collect();
    if cond.len() >= 2 {
        axes.push(Axis::Mean);
    }
    let mut out = Vec::new();
    for axis in axes {
        let values = axis.values(cond, &leaf.members);
        let mut seen: Vec<f64> = Vec::new();
        for &q in qs {
            let threshold = quantile(&values, q);
            if seen.contains(&threshold) {
                continue;
            }
            seen.push(threshold);
            let below = values.iter().filter(|&&v| v <= threshold).count();
            if below >= min_leaf && size - below >= min_leaf {
                out.push(SplitCandidate {
                    axis,
                    quantile: q,
                    threshold,
                });
            }
        }
    }
    out
}

/// Two-group statistic with the diagonal oracle covariance, computed on the
/// observations of the two children only.
fn two_group_statistic(x: &[f64], y: &[f64], lo: &[usize], hi: &[usize]) -> Result<f64> {
    let n = lo.len() + hi.len();
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (l, group) in [lo, hi].iter().enumerate() {
        for &k in group.iter() {
            xs.push(x[k]);
            ys.push(y[k]);
            labels.push(Some(l));
        }
    }
    let stats = crate::ccc::group_stats_labelled(&xs, &ys, labels, 2)?;
    Ok(oracle_statistic(&stats, &xs, &ys))
}

fn oracle_statistic(stats: &GroupStats, x: &[f64], y: &[f64]) -> f64 {
    let r = stats.correlations();
    let v: f64 = (0..stats.num_leaves())
        .map(|l| corr_variance_star(stats, x, y, l))
        .sum();
    stats.n as f64 * (r[0] - r[1]).powi(2) / v
}

/// Candidate maximising the two-group statistic on the leaf. Ties keep the
/// earlier candidate, i.e. the lower axis index and then the lower quantile.
/// Candidates with degenerate children are skipped.
pub fn best_split(
    leaf: &TreeLeaf,
    x: &[f64],
    y: &[f64],
    cond: &[&[f64]],
    candidates: &[SplitCandidate],
) -> Option<(SplitCandidate, f64)> {
    let mut best: Option<(SplitCandidate, f64)> = None;
    for cand in candidates {
        let (lo, hi) = leaf.children(cand, cond);
        match two_group_statistic(x, y, &lo.members, &hi.members) {
            Ok(t) if t.is_finite() => {
                if best.is_none_or(|(_, b)| t > b) {
                    best = Some((*cand, t));
                }
            }
            Ok(_) => log::debug!("split {cand:?} gives a non-finite statistic"),
            Err(e) => log::debug!("split {cand:?} skipped: {e}"),
        }
    }
    best
}

/// Oracle statistic of a whole partition given as leaves of members.
fn level_statistic(leaves: &[TreeLeaf], x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let mut labels = vec![None; n];
    for (l, leaf) in leaves.iter().enumerate() {
        for &k in &leaf.members {
            labels[k] = Some(l);
        }
    }
    let stats = crate::ccc::group_stats_labelled(x, y, labels, leaves.len()).ok()?;
    let l = leaves.len();
    let sigma = nalgebra::DMatrix::from_fn(l, l, |a, b| {
        if a == b {
            corr_variance_star(&stats, x, y, a)
        } else {
            0.0
        }
    });
    crate::ccc::quadratic_statistic(
        &crate::ccc::difference_matrix(l),
        &stats.correlations(),
        &sigma,
        n,
    )
    .ok()
}

/// Grows the tree breadth-first to depth `cfg.j_max`. Each level splits
/// every leaf that has a valid candidate; a deeper level replaces the
/// previous one only if it raises the oracle statistic of the whole
/// partition. Returns `None` when the root cannot be split.
pub fn grow(x: &[f64], y: &[f64], cond: &[&[f64]], cfg: &TreeConfig) -> Option<Partition> {
    Some(grow_leaves(x, y, cond, cfg)?.0)
}

/// As [`grow`], also returning the leaves with their members.
pub fn grow_leaves(
    x: &[f64],
    y: &[f64],
    cond: &[&[f64]],
    cfg: &TreeConfig,
) -> Option<(Partition, Vec<TreeLeaf>)> {
    let root = TreeLeaf::root(x.len());
    let mut current = vec![root];
    let mut kept: Option<(Vec<TreeLeaf>, f64)> = None;
    for _ in 0..cfg.j_max.max(1) {
        let mut next = Vec::with_capacity(2 * current.len());
        let mut any = false;
        for leaf in &current {
            let cands = split_candidates(leaf, cond, cfg.min_leaf);
            match best_split(leaf, x, y, cond, &cands) {
                Some((split, _)) => {
                    let (lo, hi) = leaf.children(&split, cond);
                    next.push(lo);
                    next.push(hi);
                    any = true;
                }
                None => next.push(leaf.clone()),
            }
        }
        if !any {
            break;
        }
        let stat = level_statistic(&next, x, y).unwrap_or(f64::NEG_INFINITY);
        match &kept {
            Some((_, best)) if stat <= *best => break,
            _ => kept = Some((next.clone(), stat)),
        }
        current = next;
    }
    let (leaves, _) = kept?;
    let part = Partition::new(leaves.iter().map(|l| l.conditions.clone()).collect());
    Some((part, leaves))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen::<f64>()).collect()
    }

    #[test]
    fn candidate_counts() {
        let a = uniform(2000, 1);
        let b = uniform(2000, 2);
        let root = TreeLeaf::root(2000);
        assert_eq!(split_candidates(&root, &[&a, &b], 100).len(), 9);
        assert_eq!(split_candidates(&root, &[&a], 100).len(), 3);
        let small = TreeLeaf::root(150);
        assert!(split_candidates(&small, &[&a[..150]], 100).is_empty());
        // fewer than four times min_leaf: medians only
        let mid = TreeLeaf::root(300);
        let c = split_candidates(&mid, &[&a[..300], &b[..300]], 100);
        assert_eq!(c.len(), 3);
        assert!(c.iter().all(|s| s.quantile == 0.5));
    }

    #[test]
    fn repeated_thresholds_are_dropped() {
        let a: Vec<f64> = (0..1000).map(|k| if k < 800 { 0.5 } else { 0.9 }).collect();
        let c = split_candidates(&TreeLeaf::root(1000), &[&a], 10);
        assert!(c.len() <= 1);
    }

    #[test]
    fn too_few_observations_fall_back() {
        let a = uniform(150, 3);
        let x = uniform(150, 4);
        let y = uniform(150, 5);
        assert!(grow(&x, &y, &[&a], &TreeConfig::default()).is_none());
    }

    #[test]
    fn leaves_partition_the_sample() {
        let n = 2000;
        let a = uniform(n, 6);
        let b = uniform(n, 7);
        let x = uniform(n, 8);
        let z = uniform(n, 9);
        // correlation switches on where a is large
        let y: Vec<f64> = (0..n)
            .map(|k| {
                if a[k] > 0.75 {
                    0.7 * x[k] + 0.3 * b[k]
                } else {
                    z[k]
                }
            })
            .collect();
        let cfg = TreeConfig::default();
        let (part, leaves) = grow_leaves(&x, &y, &[&a, &b], &cfg).unwrap();
        assert!(part.len() >= 2 && part.len() <= 4);
        let mut seen = vec![0u8; n];
        for leaf in &leaves {
            assert!(leaf.members.len() >= cfg.min_leaf);
            for &k in &leaf.members {
                seen[k] += 1;
            }
        }
        assert!(seen.iter().all(|&s| s == 1));
        let labels = part.assign(&[&a, &b]).unwrap();
        assert!(labels.iter().all(Option::is_some));
        // the first split is on the first column at its upper quartile
        let first = leaves[0].conditions[0];
        assert_eq!(first.axis, Axis::Var(0));
        assert!((first.threshold - 0.75).abs() < 0.05);
        let one = grow(
            &x,
            &y,
            &[&a, &b],
            &TreeConfig {
                j_max: 1,
                min_leaf: 100,
            },
        )
        .unwrap();
        assert_eq!(one.len(), 2);
        assert_eq!(grow(&x, &y, &[&a, &b], &cfg), Some(part));
    }
}
