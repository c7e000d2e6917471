//! Tree-by-tree testing of every edge of a D-vine with a Bonferroni-corrected
//! level, stopping at the first tree with a rejection.

use crate::bivcop::FamilyTag;
use crate::ccc::{
    combine_with_penalty, statistic_fixed, CovMode, EdgeData, Partition, PenaltyRecord,
    PenaltySpec, TestOutcome,
};
use crate::dvine::{EdgeId, FamilyGrid, FittedTrees, PseudoSample};
use crate::error::{Error, Result};
use crate::tree::{grow, TreeConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Settings of the test of a single edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeTestConfig {
    pub tree: TreeConfig,
    pub penalty: PenaltySpec,
    pub mode: CovMode,
}

impl Default for EdgeTestConfig {
    fn default() -> Self {
        EdgeTestConfig {
            tree: TreeConfig::default(),
            penalty: PenaltySpec::default(),
            mode: CovMode::Sandwich,
        }
    }
}

/// Statistics of one edge: the fixed median partition, the searched
/// partition when the search found one, and their penalised combination.
#[derive(Debug, Clone)]
pub struct EdgeTest {
    pub gamma0: TestOutcome,
    pub gamma_max: Option<TestOutcome>,
    pub combined: TestOutcome,
}

/// Tests one edge at `level`: the median split of the conditioning columns
/// (of their mean when there are several) against the tree-searched
/// partition.
pub fn test_edge(data: &EdgeData<'_>, cfg: &EdgeTestConfig, level: f64) -> Result<EdgeTest> {
    let gamma0_part = Partition::median_split(&data.cond)?;
    let gamma0 = statistic_fixed(data, &gamma0_part, cfg.mode)?;
    let gamma_max = match grow(data.x, data.y, &data.cond, &cfg.tree) {
        Some(part) => match statistic_fixed(data, &part, cfg.mode) {
            Ok(t) => Some(t),
            Err(e) if e.is_numeric() => {
                log::warn!("searched partition dropped: {e}");
                None
            }
            Err(e) => return Err(e),
        },
        None => None,
    };
    let n = data.n();
    let combined = combine_with_penalty(
        &gamma0,
        gamma_max.as_slice(),
        n,
        cfg.penalty.lambda(n),
        level,
    );
    Ok(EdgeTest {
        gamma0,
        gamma_max,
        combined,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierConfig {
    /// Family-wise level.
    pub alpha: f64,
    pub families: FamilyGrid,
    pub test: EdgeTestConfig,
}

impl HierConfig {
    pub fn new(d: usize, family: FamilyTag) -> Self {
        HierConfig {
            alpha: 0.05,
            families: FamilyGrid::uniform(d, family),
            test: EdgeTestConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    /// One-based label `(i,j)`.
    pub edge: String,
    pub i: usize,
    pub j: usize,
    pub copula: String,
    pub statistic: f64,
    pub p_value: f64,
    pub rejected: bool,
    pub gamma0: Partition,
    pub gamma_max: Option<Partition>,
    pub penalty: Option<PenaltyRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierOutcome {
    pub rejected: bool,
    pub stop_tree: Option<usize>,
    /// Number of potential tests `(d-1)(d-2)/2`.
    pub tests: usize,
    pub level: f64,
    pub records: Vec<EdgeRecord>,
}

/// Number of edges with a non-empty conditioning set.
pub fn potential_tests(d: usize) -> usize {
    (d - 1) * (d - 2) / 2
}

/// Fits the vine tree by tree and tests every edge of trees `2..d`, each at
/// `alpha / M`; stops after the first tree with a rejection.
pub fn hierarchical_test(sample: &PseudoSample, config: &HierConfig) -> Result<HierOutcome> {
    let d = sample.dim();
    if d < 3 {
        return Err(Error::Size(format!(
            "hierarchical test needs d >= 3, got {d}"
        )));
    }
    let m = potential_tests(d);
    let level = config.alpha / m as f64;
    let mut fit = FittedTrees::new(sample.clone(), config.families.clone())?;
    let mut records = Vec::with_capacity(m);
    let mut stop_tree = None;
    for j in 2..d {
        while fit.fitted_trees() < j {
            fit.fit_next_tree()?;
        }
        let tree: Vec<Result<EdgeRecord>> = (0..d - j)
            .into_par_iter()
            .map(|p| {
                let edge = EdgeId::new(j, p);
                edge_record(&fit, edge, &config.test, level).map_err(|e| match e {
                    Error::Edge { .. } => e,
                    e => e.on_edge(edge),
                })
            })
            .collect();
        let tree = tree.into_iter().collect::<Result<Vec<_>>>()?;
        let rejected = tree.iter().any(|r| r.rejected);
        records.extend(tree);
        if rejected {
            stop_tree = Some(j);
            break;
        }
    }
    Ok(HierOutcome {
        rejected: stop_tree.is_some(),
        stop_tree,
        tests: m,
        level,
        records,
    })
}

fn edge_record(
    fit: &FittedTrees,
    edge: EdgeId,
    cfg: &EdgeTestConfig,
    level: f64,
) -> Result<EdgeRecord> {
    let data = EdgeData::from_fit(fit, edge)?;
    let t = test_edge(&data, cfg, level)?;
    let copula = fit
        .copula(edge)
        .map(|c| format!("{c:.4}"))
        .unwrap_or_else(|_| "not fitted".into());
    Ok(EdgeRecord {
        edge: edge.to_string(),
        i: edge.pos + 1,
        j: edge.tree,
        copula,
        statistic: t.combined.statistic,
        p_value: t.combined.p_value,
        rejected: t.combined.rejects(level),
        gamma0: t.gamma0.partition,
        gamma_max: t.gamma_max.map(|g| g.partition),
        penalty: t.combined.penalty,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_counts() {
        assert_eq!(potential_tests(3), 1);
        assert_eq!(potential_tests(4), 3);
        assert_eq!(potential_tests(12), 55);
        let cfg = HierConfig::new(4, FamilyTag::CLAYTON);
        assert!((cfg.alpha / potential_tests(4) as f64 - 0.0167).abs() < 1e-4);
    }
}
