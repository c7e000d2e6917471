//! Monte Carlo studies: simulate from an example D-vine, fit, test the top
//! edge (or run the hierarchical procedure) and tally rejections per cell.
//!
//! Replication `r` of every cell draws from substream `(seed, r)`, so cells
//! share their random numbers and results do not depend on the number of
//! worker threads.

use crate::bivcop::FamilyTag;
use crate::ccc::{CovMode, EdgeData, TestOutcome};
use crate::dvine::{
    build_example_spec, rank_pseudo_obs, simulate_replication, stepwise_fit, true_ppits, DVineSpec,
    EdgeId, Example, FamilyGrid, FunctionalKind,
};
use crate::error::{Error, Result};
use crate::hier::{hierarchical_test, test_edge, EdgeTest, EdgeTestConfig, HierConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    /// Four-dimensional example over a grid of lambda and n.
    SizePower,
    /// Penalised statistic against the fixed median partition per functional.
    FunctionalComparison,
    /// Example over several dimensions.
    DimensionScan,
    /// Lower trees fitted with a family other than the true one.
    Misspecification,
    /// True against estimated pseudo-observations on identical samples.
    PseudoObsEffect,
    /// Sample-wise lower bounds for the penalty.
    PenaltyProbe,
}

impl FromStr for Study {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(
            match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
                "ex4.1" | "ex4_1" | "size_power" | "size" | "power" => Study::SizePower,
                "functional" | "functional_comparison" | "functionals" => {
                    Study::FunctionalComparison
                }
                "ex5.1" | "ex5_1" | "dimension" | "dimension_scan" => Study::DimensionScan,
                "misspec" | "misspecification" => Study::Misspecification,
                "pseudo_obs" | "pseudo_obs_effect" | "pseudo" => Study::PseudoObsEffect,
                "penalty" | "penalty_probe" => Study::PenaltyProbe,
                other => return Err(Error::Parse(format!("unknown study '{other}'"))),
            },
        )
    }
}

impl Study {
    fn label(&self) -> &'static str {
        match self {
            Study::SizePower => "size_power",
            Study::FunctionalComparison => "functional",
            Study::DimensionScan => "dimension",
            Study::Misspecification => "misspec",
            Study::PseudoObsEffect => "pseudo_obs",
            Study::PenaltyProbe => "penalty_probe",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub study: Study,
    pub functionals: Vec<FunctionalKind>,
    pub dims: Vec<usize>,
    pub ns: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub taus: Vec<f64>,
    /// Families fitted to the lower trees; only the misspecification study
    /// uses more than one.
    pub fit_families: Vec<FamilyTag>,
    pub reps: usize,
    pub seed: u64,
    /// Level of each test (family-wise level for the hierarchical procedure).
    pub alpha: f64,
    pub test: EdgeTestConfig,
    /// Runs the full hierarchical procedure instead of testing the top edge.
    pub hierarchical: bool,
}

impl StudyConfig {
    /// Desk-scale defaults of a study.
    pub fn new(study: Study) -> Self {
        let mut cfg = StudyConfig {
            study,
            functionals: vec![FunctionalKind::Sum],
            dims: vec![4],
            ns: vec![1000],
            lambdas: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            taus: vec![0.4],
            fit_families: vec![FamilyTag::CLAYTON],
            reps: 200,
            seed: 1,
            alpha: 0.05,
            test: EdgeTestConfig::default(),
            hierarchical: false,
        };
        match study {
            Study::SizePower => cfg.ns = vec![500, 1000],
            Study::FunctionalComparison => {
                cfg.functionals = vec![
                    FunctionalKind::Sum,
                    FunctionalKind::Interaction,
                    FunctionalKind::Difference,
                ];
                cfg.lambdas = vec![1.0];
            }
            Study::DimensionScan => {
                cfg.dims = vec![4, 8, 12];
                cfg.lambdas = vec![1.0];
            }
            Study::Misspecification => {
                cfg.fit_families = vec![
                    FamilyTag::SURVIVAL_GUMBEL,
                    FamilyTag::GUMBEL,
                    FamilyTag::FRANK,
                    FamilyTag::CLAYTON,
                ];
                cfg.taus = vec![0.0, 0.2, 0.4, 0.6, 0.8];
                cfg.lambdas = vec![0.0];
            }
            Study::PseudoObsEffect => cfg.lambdas = vec![0.6, 1.0],
            Study::PenaltyProbe => {
                cfg.ns = vec![250, 500, 1000];
                cfg.lambdas = vec![0.0];
            }
        }
        cfg
    }

    fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Domain("reps must be positive".into()));
        }
        let empty = self.dims.is_empty()
            || self.ns.is_empty()
            || self.lambdas.is_empty()
            || self.taus.is_empty()
            || self.functionals.is_empty()
            || self.fit_families.is_empty();
        if empty {
            return Err(Error::Domain(
                "every study grid needs at least one value".into(),
            ));
        }
        if self.dims.iter().any(|&d| d < 4) {
            return Err(Error::Domain("examples need d >= 4".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain(format!(
                "alpha={} outside (0, 1)",
                self.alpha
            )));
        }
        if self.hierarchical
            && matches!(
                self.study,
                Study::FunctionalComparison | Study::PseudoObsEffect
            )
        {
            return Err(Error::Unsupported(format!(
                "the {} study compares single-edge tests",
                self.study.label()
            )));
        }
        Ok(())
    }
}

/// How pseudo-observations for the top edge are obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Pipeline {
    /// Ranks of the sample, lower trees fitted with the given family.
    Estimated(FamilyTag),
    /// Pseudo-observations from the true lower-tree copulas.
    True,
}

/// Which statistic of a pipeline a row reports.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Pick {
    Penalised,
    FixedMedian,
}

struct Variant {
    label: String,
    pipeline: usize,
    pick: Pick,
}

fn variants(cfg: &StudyConfig) -> (Vec<Pipeline>, Vec<Variant>) {
    let base = cfg.study.label();
    let one = |label: String, pick| Variant {
        label,
        pipeline: 0,
        pick,
    };
    match cfg.study {
        Study::FunctionalComparison => (
            vec![Pipeline::Estimated(cfg.fit_families[0])],
            vec![
                one(format!("{base}_theta"), Pick::Penalised),
                one(format!("{base}_gamma_med"), Pick::FixedMedian),
            ],
        ),
        Study::PseudoObsEffect => (
            vec![Pipeline::True, Pipeline::Estimated(cfg.fit_families[0])],
            vec![
                Variant {
                    label: format!("{base}_true"),
                    pipeline: 0,
                    pick: Pick::Penalised,
                },
                Variant {
                    label: format!("{base}_estimated"),
                    pipeline: 1,
                    pick: Pick::Penalised,
                },
            ],
        ),
        Study::Misspecification => {
            let pipes: Vec<Pipeline> = cfg
                .fit_families
                .iter()
                .map(|&f| Pipeline::Estimated(f))
                .collect();
            let vars = cfg
                .fit_families
                .iter()
                .enumerate()
                .map(|(i, f)| Variant {
                    label: format!("{base}_{f}"),
                    pipeline: i,
                    pick: Pick::Penalised,
                })
                .collect();
            (pipes, vars)
        }
        _ => (
            vec![Pipeline::Estimated(cfg.fit_families[0])],
            vec![one(base.to_string(), Pick::Penalised)],
        ),
    }
}

/// One row of a study result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub study: String,
    pub functional: String,
    pub d: usize,
    pub n: usize,
    pub lambda: f64,
    pub tau: f64,
    /// Replications that completed; failed ones are excluded.
    pub reps: usize,
    pub rejections: usize,
    pub power: f64,
    pub se: f64,
    pub mean_stat: f64,
    pub mean_ms: f64,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    functional: FunctionalKind,
    d: usize,
    n: usize,
    lambda: f64,
    tau: f64,
}

fn cells(cfg: &StudyConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &functional in &cfg.functionals {
        for &d in &cfg.dims {
            for &tau in &cfg.taus {
                for &lambda in &cfg.lambdas {
                    for &n in &cfg.ns {
                        out.push(Cell {
                            functional,
                            d,
                            n,
                            lambda,
                            tau,
                        });
                    }
                }
            }
        }
    }
    out
}

fn example(d: usize) -> Example {
    if d == 4 {
        Example::FourDim
    } else {
        Example::Dim(d)
    }
}

/// Result of one pipeline on one replication: the single-edge test, or the
/// hierarchical decision with the largest edge statistic.
#[allow(clippy::large_enum_variant)]
enum Run {
    Edge(EdgeTest),
    Hier { rejected: bool, statistic: f64 },
}

fn run_pipeline(
    pipeline: Pipeline,
    spec: &DVineSpec,
    sample: &crate::dvine::PseudoSample,
    cfg: &StudyConfig,
) -> Result<Run> {
    let d = spec.dim();
    let top = EdgeId::new(d - 1, 0);
    match pipeline {
        Pipeline::True => {
            let (x, y) = true_ppits(spec, sample, top)?;
            let cond = top.conditioning().map(|c| sample.column(c)).collect();
            let data = EdgeData::oracle(&x, &y, cond);
            let test = EdgeTestConfig {
                mode: CovMode::OracleStar,
                ..cfg.test
            };
            Ok(Run::Edge(test_edge(&data, &test, cfg.alpha)?))
        }
        Pipeline::Estimated(family) => {
            let ranks = rank_pseudo_obs(sample.columns())?;
            let families = FamilyGrid::uniform(d, family);
            if cfg.hierarchical {
                let hc = HierConfig {
                    alpha: cfg.alpha,
                    families,
                    test: cfg.test,
                };
                let out = hierarchical_test(&ranks, &hc)?;
                let statistic = out
                    .records
                    .iter()
                    .map(|r| r.statistic)
                    .fold(f64::NEG_INFINITY, f64::max);
                return Ok(Run::Hier {
                    rejected: out.rejected,
                    statistic,
                });
            }
            let fit = stepwise_fit(&ranks, &families, d - 2)?;
            let data = EdgeData::from_fit(&fit, top)?;
            Ok(Run::Edge(test_edge(&data, &cfg.test, cfg.alpha)?))
        }
    }
}

fn pick(run: &Run, pick: Pick, alpha: f64) -> Result<(bool, f64)> {
    match (run, pick) {
        (Run::Edge(t), Pick::Penalised) => Ok((t.combined.rejects(alpha), t.combined.statistic)),
        (Run::Edge(t), Pick::FixedMedian) => Ok((t.gamma0.rejects(alpha), t.gamma0.statistic)),
        (
            Run::Hier {
                rejected,
                statistic,
            },
            Pick::Penalised,
        ) => Ok((*rejected, *statistic)),
        (Run::Hier { .. }, Pick::FixedMedian) => Err(Error::Unsupported(
            "fixed partition in hierarchical mode".into(),
        )),
    }
}

type RepOutcome = Vec<Result<(bool, f64, f64)>>;

fn replicate(
    cell: &Cell,
    r: usize,
    cfg: &StudyConfig,
    pipes: &[Pipeline],
    vars: &[Variant],
) -> RepOutcome {
    let run_all = || -> Result<Vec<Result<(Run, f64)>>> {
        let spec = build_example_spec(example(cell.d), cell.tau, cell.lambda, cell.functional)?;
        let sample = simulate_replication(&spec, cell.n, cfg.seed, r as u64)?;
        Ok(pipes
            .iter()
            .map(|&p| {
                let start = Instant::now();
                let run = run_pipeline(p, &spec, &sample, cfg)?;
                Ok((run, start.elapsed().as_secs_f64() * 1e3))
            })
            .collect())
    };
    match run_all() {
        Err(e) => vars
            .iter()
            .map(|_| Err(Error::State(e.to_string())))
            .collect(),
        Ok(runs) => vars
            .iter()
            .map(|v| match &runs[v.pipeline] {
                Ok((run, ms)) => pick(run, v.pick, cfg.alpha).map(|(rej, stat)| (rej, stat, *ms)),
                Err(e) => Err(Error::State(e.to_string())),
            })
            .collect(),
    }
}

/// Runs every cell of a rejection-rate study.
pub fn run_power_study(cfg: &StudyConfig) -> Result<Vec<CellResult>> {
    cfg.validate()?;
    if cfg.study == Study::PenaltyProbe {
        return Err(Error::Unsupported(
            "use run_penalty_probe for the penalty probe".into(),
        ));
    }
    let (pipes, vars) = variants(cfg);
    let mut rows = Vec::new();
    for cell in cells(cfg) {
        let reps: Vec<RepOutcome> = (0..cfg.reps)
            .into_par_iter()
            .map(|r| replicate(&cell, r, cfg, &pipes, &vars))
            .collect();
        for (vi, v) in vars.iter().enumerate() {
            let (mut ok, mut rej, mut stat, mut ms) = (0usize, 0usize, 0.0, 0.0);
            for (r, rep) in reps.iter().enumerate() {
                match &rep[vi] {
                    Ok((rj, s, t)) => {
                        ok += 1;
                        rej += *rj as usize;
                        stat += s;
                        ms += t;
                    }
                    Err(e) => log::warn!(
                        "{} d={} n={} lambda={} tau={} replication {r} failed: {e}",
                        v.label,
                        cell.d,
                        cell.n,
                        cell.lambda,
                        cell.tau
                    ),
                }
            }
            let failed = cfg.reps - ok;
            if failed > 0 {
                log::warn!(
                    "{}: {failed} of {} replications excluded",
                    v.label,
                    cfg.reps
                );
            }
            let power = if ok > 0 {
                rej as f64 / ok as f64
            } else {
                f64::NAN
            };
            rows.push(CellResult {
                study: v.label.clone(),
                functional: cell.functional.to_string(),
                d: cell.d,
                n: cell.n,
                lambda: cell.lambda,
                tau: cell.tau,
                reps: ok,
                rejections: rej,
                power,
                se: (power * (1.0 - power) / ok as f64).sqrt(),
                mean_stat: stat / ok as f64,
                mean_ms: ms / ok as f64,
            });
        }
    }
    Ok(rows)
}

/// Penalty bounds of one cell of the probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub d: usize,
    pub n: usize,
    pub lambda: f64,
    pub tau: f64,
    pub reps: usize,
    pub max_b_n: f64,
    pub mean_b_n: f64,
    /// Configured penalty at this `n`.
    pub lambda_n: f64,
    /// Replications with `b_n >= lambda_n`.
    pub exceed: usize,
    /// Replications with `lambda_n > b_n` on which the penalised and the
    /// fixed-partition test take the same decision.
    pub agree: usize,
    /// Replications with `lambda_n > b_n`.
    pub below: usize,
}

/// Per cell: largest and mean lower bound for the penalty over replications.
pub fn run_penalty_probe(cfg: &StudyConfig) -> Result<Vec<ProbeResult>> {
    cfg.validate()?;
    let family = cfg.fit_families[0];
    let mut rows = Vec::new();
    for cell in cells(cfg) {
        let out: Vec<Option<(f64, TestOutcome, TestOutcome)>> = (0..cfg.reps)
            .into_par_iter()
            .map(|r| {
                let go = || -> Result<(f64, TestOutcome, TestOutcome)> {
                    let spec = build_example_spec(
                        example(cell.d),
                        cell.tau,
                        cell.lambda,
                        cell.functional,
                    )?;
                    let sample = simulate_replication(&spec, cell.n, cfg.seed, r as u64)?;
                    let Run::Edge(t) =
                        run_pipeline(Pipeline::Estimated(family), &spec, &sample, cfg)?
                    else {
                        unreachable!()
                    };
                    let b = t.combined.penalty.map(|p| p.b_n).unwrap_or(f64::NAN);
                    Ok((b, t.gamma0, t.combined))
                };
                go().map_err(|e| log::warn!("probe n={} replication {r} failed: {e}", cell.n))
                    .ok()
            })
            .collect();
        let ok: Vec<_> = out.into_iter().flatten().collect();
        let lambda_n = cfg.test.penalty.lambda(cell.n);
        let mut row = ProbeResult {
            d: cell.d,
            n: cell.n,
            lambda: cell.lambda,
            tau: cell.tau,
            reps: ok.len(),
            max_b_n: f64::NEG_INFINITY,
            mean_b_n: 0.0,
            lambda_n,
            exceed: 0,
            agree: 0,
            below: 0,
        };
        for (b, t0, theta) in &ok {
            row.max_b_n = row.max_b_n.max(*b);
            row.mean_b_n += b / ok.len() as f64;
            if *b >= lambda_n {
                row.exceed += 1;
            } else {
                row.below += 1;
                row.agree += (t0.rejects(cfg.alpha) == theta.rejects(cfg.alpha)) as usize;
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Writes rows with a header to `path`.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Worker count from `SVCT_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("SVCT_THREADS")
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn study_names() {
        assert_eq!("ex4.1".parse::<Study>().unwrap(), Study::SizePower);
        assert_eq!(
            "penalty-probe".parse::<Study>().unwrap(),
            Study::PenaltyProbe
        );
        assert!("nothing".parse::<Study>().is_err());
    }

    #[test]
    fn cells_cover_the_grid() {
        let mut cfg = StudyConfig::new(Study::SizePower);
        cfg.lambdas = vec![0.0, 0.5, 1.0];
        cfg.ns = vec![500, 1000];
        assert_eq!(cells(&cfg).len(), 6);
        let (pipes, vars) = variants(&StudyConfig::new(Study::Misspecification));
        assert_eq!(pipes.len(), 4);
        assert_eq!(vars[0].label, "misspec_survival-gumbel");
    }

    #[test]
    fn hierarchical_comparisons_are_rejected() {
        let mut cfg = StudyConfig::new(Study::FunctionalComparison);
        cfg.hierarchical = true;
        assert!(run_power_study(&cfg).is_err());
    }
}
