use svct::bivcop::FamilyTag;
use svct::ccc::{
    correlation_covariance, statistic_fixed, Axis, Condition, CovMode, EdgeData, Op, Partition,
};
use svct::dvine::{
    build_example_spec, rank_pseudo_obs, simulate_replication, stepwise_fit, EdgeId, Example,
    FamilyGrid, FunctionalKind, PseudoSample,
};
use svct::harness::{run_penalty_probe, run_power_study, CellResult, Study, StudyConfig};
use svct::hier::{hierarchical_test, HierConfig, HierOutcome};
use svct::tree::{grow_leaves, TreeConfig};

fn ranked(lambda: f64, n: usize, seed: u64, r: u64) -> PseudoSample {
    let spec = build_example_spec(Example::FourDim, 0.4, lambda, FunctionalKind::Sum).unwrap();
    let s = simulate_replication(&spec, n, seed, r).unwrap();
    rank_pseudo_obs(s.columns()).unwrap()
}

#[test]
fn hierarchical_test_finds_the_top_edge() {
    let cfg = HierConfig::new(4, FamilyTag::CLAYTON);
    let reps = 100;
    let mut at_top = 0;
    for r in 0..reps {
        let out = hierarchical_test(&ranked(1.0, 1000, 21, r), &cfg).unwrap();
        assert_eq!(out.tests, 3);
        assert!((out.level - 0.05 / 3.0).abs() < 1e-15);
        at_top += (out.stop_tree == Some(3)) as usize;
    }
    assert!(at_top >= 90, "stopped at tree 3 in {at_top}/{reps}");
}

#[test]
fn hierarchical_family_wise_size() {
    let cfg = HierConfig::new(4, FamilyTag::CLAYTON);
    let reps = 500;
    let mut rejected = 0;
    for r in 0..reps {
        let out = hierarchical_test(&ranked(0.0, 1000, 22, r), &cfg).unwrap();
        if out.rejected {
            rejected += 1;
        } else {
            // without a rejection every potential test is run
            assert_eq!(out.records.len(), 3);
        }
    }
    assert!(
        rejected as f64 / reps as f64 <= 0.08,
        "family-wise rate {rejected}/{reps}"
    );
}

#[test]
fn hierarchical_stop_semantics() {
    let spec = build_example_spec(Example::Dim(6), 0.4, 1.0, FunctionalKind::Sum).unwrap();
    let sample =
        rank_pseudo_obs(simulate_replication(&spec, 1000, 23, 0).unwrap().columns()).unwrap();
    let out = hierarchical_test(&sample, &HierConfig::new(6, FamilyTag::CLAYTON)).unwrap();
    assert_eq!(out.tests, 10);
    let stop = out.stop_tree.expect("violation on the top edge is found");
    // records cover trees 2..=stop completely and nothing beyond
    let expected: usize = (2..=stop).map(|j| 6 - j).sum();
    assert_eq!(out.records.len(), expected);
    assert!(out.records.iter().all(|r| r.j <= stop));
    assert!(out
        .records
        .iter()
        .filter(|r| r.j < stop)
        .all(|r| !r.rejected));
    assert!(out.records.iter().any(|r| r.j == stop && r.rejected));

    let json = serde_json::to_string(&out).unwrap();
    let back: HierOutcome = serde_json::from_str(&json).unwrap();
    assert_eq!(back, out);
}

#[test]
fn three_dimensions_has_one_test() {
    let spec = svct::dvine::DVineSpec::uniform(
        3,
        svct::bivcop::BivCopula::from_tau(FamilyTag::CLAYTON, 0.3).unwrap(),
    );
    let s = rank_pseudo_obs(simulate_replication(&spec, 600, 24, 0).unwrap().columns()).unwrap();
    let out = hierarchical_test(&s, &HierConfig::new(3, FamilyTag::CLAYTON)).unwrap();
    assert_eq!(out.tests, 1);
    assert_eq!(out.level, 0.05);
    assert_eq!(out.records.len(), 1);
}

#[test]
fn searched_partition_under_alternative() {
    let fams = FamilyGrid::uniform(4, FamilyTag::CLAYTON);
    let edge = EdgeId::new(3, 0);
    let reps = 100;
    let (mut near_q3, mut larger) = (0, 0);
    for r in 0..reps {
        let fit = stepwise_fit(&ranked(1.0, 1000, 25, r), &fams, 2).unwrap();
        let (x, y) = fit.compute_ppits(edge).unwrap();
        let cond: Vec<&[f64]> = edge
            .conditioning()
            .map(|c| fit.sample().column(c))
            .collect();
        let (part, leaves) = grow_leaves(x, y, &cond, &TreeConfig::default()).unwrap();
        let first = leaves[0].conditions[0];
        let values = first.axis.values(&cond, &(0..1000).collect::<Vec<_>>());
        let q = values.iter().filter(|&&v| v <= first.threshold).count() as f64 / 1000.0;
        near_q3 += ((q - 0.75).abs() < 0.05) as usize;
        let data = EdgeData::oracle(x, y, cond.clone());
        let t_max = statistic_fixed(&data, &part, CovMode::OracleStar)
            .unwrap()
            .statistic;
        let t_med = statistic_fixed(
            &data,
            &Partition::median_split(&cond).unwrap(),
            CovMode::OracleStar,
        )
        .unwrap()
        .statistic;
        larger += (t_max > t_med) as usize;
    }
    assert!(
        near_q3 >= 50,
        "first split near the upper quartile in {near_q3}/{reps}"
    );
    assert!(larger >= 95, "searched statistic larger in {larger}/{reps}");
}

#[test]
fn sandwich_matches_bootstrap() {
    let fams = FamilyGrid::uniform(4, FamilyTag::CLAYTON);
    let edge = EdgeId::new(3, 0);
    let fit = stepwise_fit(&ranked(0.0, 1000, 26, 0), &fams, 2).unwrap();
    let data = EdgeData::from_fit(&fit, edge).unwrap();
    let part = Partition::median_split(&data.cond).unwrap();
    let stats = data.group_stats(&part).unwrap();
    let sandwich = correlation_covariance(&data, &part, &stats, CovMode::Sandwich).unwrap();
    let boot = correlation_covariance(
        &data,
        &part,
        &stats,
        CovMode::Bootstrap {
            replicates: 500,
            seed: 7,
        },
    )
    .unwrap();
    for l in 0..2 {
        let rel = (sandwich[(l, l)] - boot[(l, l)]).abs() / boot[(l, l)];
        assert!(
            rel < 0.25,
            "leaf {l}: sandwich {} bootstrap {}",
            sandwich[(l, l)],
            boot[(l, l)]
        );
    }
    // disjoint leaves: off-diagonal terms come only from the estimation steps
    assert!(sandwich[(0, 1)].abs() < sandwich[(0, 0)].min(sandwich[(1, 1)]));
}

fn quadrants() -> Partition {
    let c = |axis, op, threshold| Condition {
        axis,
        op,
        threshold,
    };
    let leaves = [
        (Op::Le, Op::Le),
        (Op::Le, Op::Gt),
        (Op::Gt, Op::Le),
        (Op::Gt, Op::Gt),
    ]
    .into_iter()
    .map(|(a, b)| vec![c(Axis::Var(0), a, 0.5), c(Axis::Var(1), b, 0.5)])
    .collect();
    Partition::new(leaves)
}

#[test]
fn covariance_estimates_are_positive_semidefinite() {
    let fams = FamilyGrid::uniform(4, FamilyTag::CLAYTON);
    let edge = EdgeId::new(3, 0);
    for r in 0..5 {
        let fit = stepwise_fit(&ranked(0.5, 1000, 27, r), &fams, 2).unwrap();
        let data = EdgeData::from_fit(&fit, edge).unwrap();
        let parts = [Partition::median_split(&data.cond).unwrap(), quadrants()];
        for part in &parts {
            let stats = data.group_stats(part).unwrap();
            for mode in [
                CovMode::OracleStar,
                CovMode::Sandwich,
                CovMode::SandwichKnownMargins,
            ] {
                let s = correlation_covariance(&data, part, &stats, mode).unwrap();
                let min = s.clone().symmetric_eigenvalues().min();
                assert!(min >= -1e-10 * s.trace(), "{mode:?}: eigenvalue {min}");
            }
        }
    }
}

#[test]
fn penalty_bound_under_the_null() {
    let mut cfg = StudyConfig::new(Study::PenaltyProbe);
    cfg.reps = 200;
    cfg.seed = 28;
    let rows = run_penalty_probe(&cfg).unwrap();
    assert_eq!(rows.len(), 3);
    for row in &rows {
        assert_eq!(row.reps, 200);
        assert!(
            row.max_b_n < 1.0 / (row.n as f64).sqrt(),
            "n={}: max b_n {}",
            row.n,
            row.max_b_n
        );
        assert_eq!(row.exceed, 0);
        assert_eq!(row.agree, row.below);
    }
}

#[test]
fn single_replication_probe_reports_its_bound() {
    let mut cfg = StudyConfig::new(Study::PenaltyProbe);
    cfg.reps = 1;
    cfg.ns = vec![500];
    let rows = run_penalty_probe(&cfg).unwrap();
    assert_eq!(rows[0].max_b_n, rows[0].mean_b_n);
}

fn strip_timing(rows: Vec<CellResult>) -> Vec<CellResult> {
    rows.into_iter()
        .map(|r| CellResult { mean_ms: 0.0, ..r })
        .collect()
}

#[test]
fn studies_do_not_depend_on_thread_count() {
    let mut cfg = StudyConfig::new(Study::SizePower);
    cfg.reps = 6;
    cfg.ns = vec![500];
    cfg.lambdas = vec![0.0, 1.0];
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        strip_timing(pool.install(|| run_power_study(&cfg).unwrap()))
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn hierarchical_studies_run() {
    let mut cfg = StudyConfig::new(Study::SizePower);
    cfg.reps = 3;
    cfg.ns = vec![500];
    cfg.lambdas = vec![1.0];
    cfg.hierarchical = true;
    let rows = run_power_study(&cfg).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].reps, 3);
}
