//! Partitions of the conditioning support into leaves described by
//! conjunctions of threshold conditions.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Quantity a threshold applies to: one conditioning column (by its index
/// among the conditioning columns) or the mean of all of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Var(usize),
    Mean,
}

impl Axis {
    pub fn value(&self, cond: &[&[f64]], k: usize) -> f64 {
        match *self {
            Axis::Var(i) => cond[i][k],
            Axis::Mean => cond.iter().map(|c| c[k]).sum::<f64>() / cond.len() as f64,
        }
    }

    pub fn values(&self, cond: &[&[f64]], rows: &[usize]) -> Vec<f64> {
        rows.iter().map(|&k| self.value(cond, k)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Le,
    Gt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub axis: Axis,
    pub op: Op,
    pub threshold: f64,
}

impl Condition {
    pub fn holds(&self, cond: &[&[f64]], k: usize) -> bool {
        let v = self.axis.value(cond, k);
        match self.op {
            Op::Le => v <= self.threshold,
            Op::Gt => v > self.threshold,
        }
    }
}

/// A leaf is the conjunction of its conditions; no conditions means the
/// whole support.
pub type Leaf = Vec<Condition>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub leaves: Vec<Leaf>,
}

impl Partition {
    pub fn new(leaves: Vec<Leaf>) -> Self {
        Partition { leaves }
    }

    /// Split of the support at `threshold` along `axis`.
    pub fn split(axis: Axis, threshold: f64) -> Self {
        Partition {
            leaves: vec![
                vec![Condition {
                    axis,
                    op: Op::Le,
                    threshold,
                }],
                vec![Condition {
                    axis,
                    op: Op::Gt,
                    threshold,
                }],
            ],
        }
    }

    /// Median split of the first conditioning column when there is only one,
    /// otherwise of the mean of all conditioning columns.
    pub fn median_split(cond: &[&[f64]]) -> Result<Self> {
        let axis = match cond.len() {
            0 => return Err(Error::Partition("no conditioning columns".into())),
            1 => Axis::Var(0),
            _ => Axis::Mean,
        };
        let all: Vec<usize> = (0..cond[0].len()).collect();
        let threshold = quantile(&axis.values(cond, &all), 0.5);
        Ok(Partition::split(axis, threshold))
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    /// Leaf index of every observation, `None` when no leaf contains it.
    pub fn assign(&self, cond: &[&[f64]]) -> Result<Vec<Option<usize>>> {
        let n = cond.first().map_or(0, |c| c.len());
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let mut hit = None;
            for (l, leaf) in self.leaves.iter().enumerate() {
                if leaf.iter().all(|c| c.holds(cond, k)) {
                    if hit.is_some() {
                        return Err(Error::Partition(format!(
                            "observation {k} lies in more than one leaf"
                        )));
                    }
                    hit = Some(l);
                }
            }
            out.push(hit);
        }
        Ok(out)
    }

    /// Same leaves in another order.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Partition {
            leaves: order.iter().map(|&l| self.leaves[l].clone()).collect(),
        }
    }
}

/// Empirical quantile by linear interpolation between order statistics
/// (Hyndman-Fan type 7).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}
