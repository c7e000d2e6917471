//! D-vine copula models: specification, simulation, rank pseudo-observations,
//! PPIT propagation and stepwise maximum-likelihood fitting.
//!
//! Variables are indexed from 0. The edge at position `pos` of tree `tree`
//! joins variables `pos` and `pos + tree` given the variables strictly between
//! them. Displayed edge labels use the one-based `(i, j)` convention where `i`
//! is the first variable and `j` the tree.

mod examples;
mod fit;
mod pseudo;
mod simulate;

pub use examples::{build_example_spec, Example};
pub use fit::{fit_pair, stepwise_fit, FittedTrees};
pub use pseudo::{rank_column, rank_pseudo_obs, true_ppits, Triangle};
pub use simulate::{simulate, simulate_replication};

use crate::bivcop::{BivCopula, FamilyTag};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId {
    /// Tree index, starting at 1.
    pub tree: usize,
    /// Position within the tree, starting at 0.
    pub pos: usize,
}

impl EdgeId {
    pub fn new(tree: usize, pos: usize) -> Self {
        EdgeId { tree, pos }
    }

    /// Edge from the one-based `(i, j)` label: first variable `i`, tree `j`.
    pub fn from_one_based(i: usize, j: usize) -> Result<Self> {
        if i == 0 || j == 0 {
            return Err(Error::Domain(format!("edge ({i},{j}) is not one-based")));
        }
        Ok(EdgeId {
            tree: j,
            pos: i - 1,
        })
    }

    pub fn left_var(&self) -> usize {
        self.pos
    }

    pub fn right_var(&self) -> usize {
        self.pos + self.tree
    }

    /// Conditioning variables in increasing order.
    pub fn conditioning(&self) -> std::ops::Range<usize> {
        self.pos + 1..self.pos + self.tree
    }

    pub fn check(&self, d: usize) -> Result<()> {
        if self.tree == 0 || self.tree >= d || self.pos + self.tree >= d {
            Err(Error::Domain(format!(
                "edge {self} does not exist for d={d}"
            )))
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.pos + 1, self.tree)
    }
}

impl FromStr for EdgeId {
    type Err = Error;

    /// Parses `i,j` (optionally in parentheses) in the one-based convention.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        let bad = || Error::Parse(format!("edge '{s}' is not of the form i,j"));
        if parts.len() != 2 {
            return Err(bad());
        }
        let i = parts[0].parse().map_err(|_| bad())?;
        let j = parts[1].parse().map_err(|_| bad())?;
        EdgeId::from_one_based(i, j)
    }
}

/// All edges of trees `from..=to` of a `d`-dimensional D-vine, tree by tree.
pub fn edges_of_trees(d: usize, from: usize, to: usize) -> impl Iterator<Item = EdgeId> {
    (from..=to.min(d - 1)).flat_map(move |t| (0..d - t).map(move |p| EdgeId::new(t, p)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalKind {
    /// `1 + 2.5 l (1 - 1.5 (a + b))^2`
    Sum,
    /// `1 + 2.5 l (1 - 2 a (a + b))^2`
    Interaction,
    /// `1 + 2.5 l (1 - 2 (a - b))^2`
    Difference,
}

impl FromStr for FunctionalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sum" | "alpha" | "a" => Ok(FunctionalKind::Sum),
            "interaction" | "alpha_i" | "i" => Ok(FunctionalKind::Interaction),
            "difference" | "alpha_d" | "d" => Ok(FunctionalKind::Difference),
            _ => Err(Error::Parse(format!("unknown functional '{s}'"))),
        }
    }
}

impl fmt::Display for FunctionalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FunctionalKind::Sum => "sum",
            FunctionalKind::Interaction => "interaction",
            FunctionalKind::Difference => "difference",
        })
    }
}

/// Parameter of the varying top copula as a function of the first two
/// conditioning values; `lambda` scales the departure from the constant 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamFunctional {
    pub kind: FunctionalKind,
    pub lambda: f64,
}

impl ParamFunctional {
    pub fn eval(&self, a: f64, b: f64) -> f64 {
        let inner = match self.kind {
            FunctionalKind::Sum => 1.0 - 1.5 * (a + b),
            FunctionalKind::Interaction => 1.0 - 2.0 * a * (a + b),
            FunctionalKind::Difference => 1.0 - 2.0 * (a - b),
        };
        1.0 + 2.5 * self.lambda * inner * inner
    }
}

/// One edge whose copula parameter varies with its conditioning values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalEdge {
    pub edge: EdgeId,
    pub family: FamilyTag,
    pub param_fn: ParamFunctional,
}

/// A D-vine copula: `d(d-1)/2` pair copulas stored tree by tree, optionally
/// with one edge whose parameter depends on the conditioning values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DVineSpec {
    d: usize,
    trees: Vec<Vec<BivCopula>>,
    conditional: Option<ConditionalEdge>,
}

impl DVineSpec {
    /// `trees[t - 1]` holds the `d - t` copulas of tree `t`.
    pub fn new(
        d: usize,
        trees: Vec<Vec<BivCopula>>,
        conditional: Option<ConditionalEdge>,
    ) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("dimension {d} too small")));
        }
        if trees.len() != d - 1
            || trees
                .iter()
                .enumerate()
                .any(|(t, row)| row.len() != d - 1 - t)
        {
            return Err(Error::Size(format!(
                "a {d}-dimensional D-vine needs {} edges arranged by tree",
                d * (d - 1) / 2
            )));
        }
        if let Some(c) = &conditional {
            c.edge.check(d)?;
            if c.edge.tree < 3 {
                return Err(Error::Domain(format!(
                    "conditional edge {} needs at least two conditioning variables",
                    c.edge
                )));
            }
        }
        Ok(DVineSpec {
            d,
            trees,
            conditional,
        })
    }

    pub fn independence(d: usize) -> Self {
        let trees = (1..d)
            .map(|t| vec![BivCopula::independence(); d - t])
            .collect();
        DVineSpec {
            d,
            trees,
            conditional: None,
        }
    }

    /// Every edge with the same copula.
    pub fn uniform(d: usize, cop: BivCopula) -> Self {
        let trees = (1..d).map(|t| vec![cop; d - t]).collect();
        DVineSpec {
            d,
            trees,
            conditional: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn copula(&self, edge: EdgeId) -> BivCopula {
        self.trees[edge.tree - 1][edge.pos]
    }

    pub fn trees(&self) -> &[Vec<BivCopula>] {
        &self.trees
    }

    pub fn conditional(&self) -> Option<&ConditionalEdge> {
        self.conditional.as_ref()
    }
}

/// Triangular grid of copula families, one per edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyGrid {
    trees: Vec<Vec<FamilyTag>>,
}

impl FamilyGrid {
    pub fn uniform(d: usize, tag: FamilyTag) -> Self {
        FamilyGrid {
            trees: (1..d).map(|t| vec![tag; d - t]).collect(),
        }
    }

    /// One family per tree; the last entry is reused for deeper trees.
    pub fn per_tree(d: usize, tags: &[FamilyTag]) -> Result<Self> {
        let last = *tags
            .last()
            .ok_or_else(|| Error::Parse("empty family list".into()))?;
        Ok(FamilyGrid {
            trees: (1..d)
                .map(|t| vec![*tags.get(t - 1).unwrap_or(&last); d - t])
                .collect(),
        })
    }

    pub fn from_spec(spec: &DVineSpec) -> Self {
        FamilyGrid {
            trees: spec
                .trees
                .iter()
                .map(|row| row.iter().map(|c| c.tag).collect())
                .collect(),
        }
    }

    pub fn set(&mut self, edge: EdgeId, tag: FamilyTag) {
        self.trees[edge.tree - 1][edge.pos] = tag;
    }

    pub fn get(&self, edge: EdgeId) -> FamilyTag {
        self.trees[edge.tree - 1][edge.pos]
    }

    pub fn dim(&self) -> usize {
        self.trees.len() + 1
    }

    /// Grid of the sub-vine on the `m` consecutive variables starting at `lo`.
    pub fn sub(&self, lo: usize, m: usize) -> FamilyGrid {
        FamilyGrid {
            trees: (1..m)
                .map(|t| self.trees[t - 1][lo..lo + m - t].to_vec())
                .collect(),
        }
    }
}

/// An `n x d` sample on the open unit cube, stored by column.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoSample {
    columns: Vec<Vec<f64>>,
    labels: Vec<String>,
}

impl PseudoSample {
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let labels = (1..=columns.len()).map(|i| format!("u{i}")).collect();
        Self::with_labels(columns, labels)
    }

    pub fn with_labels(columns: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        if columns.is_empty() || n == 0 {
            return Err(Error::Size("empty sample".into()));
        }
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::Size("columns differ in length".into()));
        }
        if labels.len() != columns.len() {
            return Err(Error::Size("one label per column required".into()));
        }
        for (i, col) in columns.iter().enumerate() {
            if let Some(x) = col.iter().find(|&&x| !(x > 0.0 && x < 1.0)) {
                return Err(Error::Domain(format!(
                    "column {} holds {x}, outside (0, 1)",
                    labels[i]
                )));
            }
        }
        Ok(PseudoSample { columns, labels })
    }

    pub fn n(&self) -> usize {
        self.columns[0].len()
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.columns[i]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn row(&self, k: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[k]).collect()
    }

    /// Rows selected by index, keeping the column labels.
    pub fn select_rows(&self, rows: &[usize]) -> PseudoSample {
        PseudoSample {
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&k| c[k]).collect())
                .collect(),
            labels: self.labels.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_labels() {
        let e = EdgeId::from_one_based(1, 3).unwrap();
        assert_eq!((e.left_var(), e.right_var()), (0, 3));
        assert_eq!(e.conditioning(), 1..3);
        assert_eq!(e.to_string(), "(1,3)");
        assert_eq!("2,2".parse::<EdgeId>().unwrap(), EdgeId::new(2, 1));
        assert!(e.check(4).is_ok());
        assert!(EdgeId::new(3, 1).check(4).is_err());
        assert!("1;3".parse::<EdgeId>().is_err());
    }

    #[test]
    fn functionals() {
        for kind in [
            FunctionalKind::Sum,
            FunctionalKind::Interaction,
            FunctionalKind::Difference,
        ] {
            let f0 = ParamFunctional { kind, lambda: 0.0 };
            let f1 = ParamFunctional { kind, lambda: 1.0 };
            for &(a, b) in &[(0.1, 0.2), (0.9, 0.3), (0.5, 0.5)] {
                assert_eq!(f0.eval(a, b), 1.0);
                assert!(f1.eval(a, b) >= 1.0);
            }
        }
        let f = ParamFunctional {
            kind: FunctionalKind::Sum,
            lambda: 1.0,
        };
        assert!((f.eval(0.2, 0.4) - (1.0 + 2.5 * 0.01)).abs() < 1e-15);
        let f = ParamFunctional {
            kind: FunctionalKind::Difference,
            lambda: 0.5,
        };
        assert!((f.eval(0.2, 0.4) - (1.0 + 1.25 * 1.96)).abs() < 1e-14);
    }

    #[test]
    fn spec_shape_is_checked() {
        assert!(DVineSpec::new(3, vec![vec![BivCopula::independence(); 2]], None).is_err());
        let spec = DVineSpec::independence(5);
        assert_eq!(spec.trees().iter().map(Vec::len).sum::<usize>(), 10);
    }

    #[test]
    fn sample_rejects_boundary_values() {
        assert!(PseudoSample::from_columns(vec![vec![0.2, 1.0]]).is_err());
        assert!(PseudoSample::from_columns(vec![vec![0.2, 0.5], vec![0.3]]).is_err());
    }
}
