//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 on usage or input errors, 2 on numerical
//! failures.

use crate::bivcop::FamilyTag;
use crate::ccc::{CovMode, EdgeData, PenaltySpec};
use crate::dvine::{
    build_example_spec, rank_pseudo_obs, simulate, stepwise_fit, EdgeId, Example, FamilyGrid,
    FunctionalKind, PseudoSample,
};
use crate::error::{Error, Result};
use crate::harness::{run_penalty_probe, run_power_study, write_csv, Study, StudyConfig};
use crate::hier::{hierarchical_test, test_edge, EdgeTestConfig, HierConfig, HierOutcome};
use crate::tree::TreeConfig;
use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(
    name = "svct",
    version,
    about = "Constant conditional correlation tests for D-vine copulas"
)]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a sample from an example D-vine and write it as CSV.
    Simulate(SimulateArgs),
    /// Test one edge, or every edge with the hierarchical procedure.
    Test(TestArgs),
    /// Monte Carlo rejection rates over a grid of settings.
    Power(PowerArgs),
    /// Sample-wise lower bounds for the penalty under the null.
    PenaltyProbe(PowerArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// ex4.1 (four dimensions) or ex5.1 (dimension from --d).
    #[arg(long, default_value = "ex4.1")]
    example: String,
    #[arg(long, default_value_t = 4)]
    d: usize,
    /// Kendall's tau of the first-tree copulas.
    #[arg(long, default_value_t = 0.4)]
    tau: f64,
    /// Strength of the violation on the top edge.
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value = "sum")]
    functional: FunctionalKind,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Read further flags from a file of key=value lines.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
struct TestSettings {
    /// Covariance estimator: sandwich, known-margins, oracle or bootstrap:B.
    #[arg(long, default_value = "sandwich")]
    mode: CovMode,
    #[arg(long, default_value_t = 2)]
    j_max: usize,
    #[arg(long, default_value_t = 100)]
    min_leaf: usize,
    /// Penalty is scale * n^(-exponent).
    #[arg(long, default_value_t = 1.0)]
    penalty_scale: f64,
    #[arg(long, default_value_t = 0.5)]
    penalty_exponent: f64,
}

impl TestSettings {
    fn edge_config(&self) -> EdgeTestConfig {
        EdgeTestConfig {
            tree: TreeConfig {
                j_max: self.j_max,
                min_leaf: self.min_leaf,
            },
            penalty: PenaltySpec {
                scale: self.penalty_scale,
                exponent: self.penalty_exponent,
            },
            mode: self.mode,
        }
    }
}

#[derive(Debug, Args)]
struct TestArgs {
    /// CSV file with one column per variable, in vine order.
    #[arg(long)]
    data: PathBuf,
    /// Copula families, one per tree; the last one is reused for deeper trees.
    #[arg(long, value_delimiter = ',', default_value = "clayton")]
    families: Vec<FamilyTag>,
    /// One-based edge `i,j` (first variable, tree); without it every edge is
    /// tested hierarchically.
    #[arg(long)]
    edge: Option<EdgeId>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Use the data as given instead of their rescaled ranks.
    #[arg(long)]
    no_ranks: bool,
    /// Print the hierarchical result as a table instead of JSON.
    #[arg(long)]
    table: bool,
    #[command(flatten)]
    settings: TestSettings,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PowerArgs {
    /// ex4.1, functional, ex5.1, misspec, pseudo-obs or penalty.
    #[arg(long, default_value = "ex4.1")]
    study: Study,
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    taus: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    functionals: Option<Vec<FunctionalKind>>,
    /// Families fitted to the lower trees.
    #[arg(long, value_delimiter = ',')]
    families: Option<Vec<FamilyTag>>,
    #[arg(long)]
    reps: Option<usize>,
    /// Full-scale replication count (1000).
    #[arg(long)]
    full: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Run the hierarchical procedure on every replication.
    #[arg(long)]
    hierarchical: bool,
    #[command(flatten)]
    settings: TestSettings,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

impl PowerArgs {
    fn study_config(&self, probe: bool) -> StudyConfig {
        let study = if probe {
            Study::PenaltyProbe
        } else {
            self.study
        };
        let mut cfg = StudyConfig::new(study);
        if let Some(v) = &self.lambdas {
            cfg.lambdas = v.clone();
        }
        if let Some(v) = &self.n {
            cfg.ns = v.clone();
        }
        if let Some(v) = &self.dims {
            cfg.dims = v.clone();
        }
        if let Some(v) = &self.taus {
            cfg.taus = v.clone();
        }
        if let Some(v) = &self.functionals {
            cfg.functionals = v.clone();
        }
        if let Some(v) = &self.families {
            cfg.fit_families = v.clone();
        }
        if self.full {
            cfg.reps = 1000;
        }
        if let Some(r) = self.reps {
            cfg.reps = r;
        }
        cfg.seed = self.seed;
        cfg.alpha = self.alpha;
        cfg.hierarchical = self.hierarchical;
        cfg.test = self.settings.edge_config();
        cfg
    }
}

/// Expands `--config FILE` into the flags it lists, placed before the
/// remaining arguments so that explicit flags win.
fn expand_config(argv: Vec<String>) -> Result<Vec<String>> {
    let Some(pos) = argv
        .iter()
        .position(|a| a == "--config" || a.starts_with("--config="))
    else {
        return Ok(argv);
    };
    let (path, used) = match argv[pos].strip_prefix("--config=") {
        Some(p) => (p.to_string(), 1),
        None => (
            argv.get(pos + 1)
                .cloned()
                .ok_or_else(|| Error::Parse("--config needs a file".into()))?,
            2,
        ),
    };
    let text = std::fs::read_to_string(&path)?;
    let mut flags = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("{path}:{}: expected key=value", lineno + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        match value {
            "true" => flags.push(format!("--{key}")),
            "false" => {}
            _ => {
                flags.push(format!("--{key}"));
                flags.push(value.to_string());
            }
        }
    }
    // flags go right after the subcommand name
    let split = pos.min(2);
    let mut out: Vec<String> = argv[..split].to_vec();
    out.extend(flags);
    out.extend_from_slice(&argv[split..pos]);
    out.extend_from_slice(&argv[pos + used..]);
    Ok(out)
}

/// Reads a numeric CSV; a first row that does not parse as numbers is taken
/// as the header.
pub fn read_csv_columns(path: &Path) -> Result<(Vec<Vec<f64>>, Vec<String>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let mut rows = rdr.records();
    let first = rows
        .next()
        .ok_or_else(|| Error::Size(format!("{} is empty", path.display())))??;
    let parse = |rec: &csv::StringRecord, line: usize| -> Result<Vec<f64>> {
        rec.iter()
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {line}: '{c}' is not a number")))
            })
            .collect()
    };
    let mut labels: Vec<String> = (1..=first.len()).map(|i| format!("u{i}")).collect();
    let mut data = Vec::new();
    match parse(&first, 1) {
        Ok(row) => data.push(row),
        Err(_) => labels = first.iter().map(|s| s.trim().to_string()).collect(),
    }
    for (i, rec) in rows.enumerate() {
        let row = parse(&rec?, i + 2)?;
        if row.len() != labels.len() {
            return Err(Error::Size(format!(
                "line {} has {} fields",
                i + 2,
                row.len()
            )));
        }
        data.push(row);
    }
    let columns = (0..labels.len())
        .map(|c| data.iter().map(|r| r[c]).collect())
        .collect();
    Ok((columns, labels))
}

fn write_sample(path: &Path, sample: &PseudoSample) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(sample.labels())?;
    for k in 0..sample.n() {
        w.write_record(sample.row(k).iter().map(|v| format!("{v}")))?;
    }
    w.flush()?;
    Ok(())
}

fn parse_example(name: &str, d: usize) -> Result<Example> {
    match name.trim().to_ascii_lowercase().as_str() {
        "ex4.1" | "ex4_1" | "four" => Ok(Example::FourDim),
        "ex5.1" | "ex5_1" => Ok(Example::Dim(d)),
        other => Err(Error::Parse(format!("unknown example '{other}'"))),
    }
}

fn render_table(out: &HierOutcome) -> String {
    let mut s = format!(
        "{} potential tests, level per edge {:.5}\n{:<8} {:<24} {:>10} {:>10} {:>6}\n",
        out.tests, out.level, "edge", "copula", "statistic", "p-value", "reject"
    );
    let mut tree = 0;
    for r in &out.records {
        if r.j != tree {
            tree = r.j;
            s.push_str(&format!("-- tree {tree}\n"));
        }
        s.push_str(&format!(
            "{:<8} {:<24} {:>10.3} {:>10.4} {:>6}\n",
            r.edge,
            r.copula,
            r.statistic,
            r.p_value,
            if r.rejected { "yes" } else { "no" }
        ));
    }
    match out.stop_tree {
        Some(j) => s.push_str(&format!("rejected in tree {j}\n")),
        None => s.push_str("not rejected\n"),
    }
    s
}

fn run_test(args: &TestArgs, stdout: &mut dyn Write) -> Result<()> {
    let (columns, labels) = read_csv_columns(&args.data)?;
    let sample = if args.no_ranks {
        PseudoSample::with_labels(columns, labels)?
    } else {
        let s = rank_pseudo_obs(&columns)?;
        PseudoSample::with_labels(s.columns().to_vec(), labels)?
    };
    let d = sample.dim();
    let families = FamilyGrid::per_tree(d, &args.families)?;
    let cfg = args.settings.edge_config();
    match args.edge {
        Some(edge) => {
            edge.check(d)?;
            if edge.tree < 2 {
                return Err(Error::Domain(format!(
                    "edge {edge} has no conditioning variables"
                )));
            }
            let fit = stepwise_fit(&sample, &families, edge.tree - 1)?;
            let data = EdgeData::from_fit(&fit, edge)?;
            let t = test_edge(&data, &cfg, args.alpha)?;
            writeln!(stdout, "{}", serde_json::to_string_pretty(&t.combined)?)?;
        }
        None => {
            let hc = HierConfig {
                alpha: args.alpha,
                families,
                test: cfg,
            };
            let out = hierarchical_test(&sample, &hc)?;
            if args.table {
                write!(stdout, "{}", render_table(&out))?;
            } else {
                writeln!(stdout, "{}", serde_json::to_string_pretty(&out)?)?;
            }
        }
    }
    Ok(())
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => {
            let which = parse_example(&a.example, a.d)?;
            let spec = build_example_spec(which, a.tau, a.lambda, a.functional)?;
            let sample = simulate(&spec, a.n, a.seed)?;
            write_sample(&a.out, &sample)?;
        }
        Command::Test(a) => run_test(&a, stdout)?,
        Command::Power(a) => {
            let cfg = a.study_config(false);
            if cfg.study == Study::PenaltyProbe {
                write_csv(&a.out, &run_penalty_probe(&cfg)?)?;
            } else {
                write_csv(&a.out, &run_power_study(&cfg)?)?;
            }
        }
        Command::PenaltyProbe(a) => {
            let cfg = a.study_config(true);
            write_csv(&a.out, &run_penalty_probe(&cfg)?)?;
        }
    }
    Ok(())
}

/// Runs the command line `argv` (including the program name) and returns the
/// exit code.
pub fn run<W: Write>(argv: Vec<String>, stdout: &mut W, stderr: &mut dyn Write) -> i32 {
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return 1;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    match dispatch(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_numeric() {
                2
            } else {
                1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn config_lines_become_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.conf");
        std::fs::write(&path, "# study\nreps = 3\nhierarchical=true\nmin_leaf=50\n").unwrap();
        let argv = args(&format!("svct power --config {} --reps 5", path.display()));
        let out = expand_config(argv).unwrap();
        assert_eq!(
            out,
            args("svct power --reps 3 --hierarchical --min-leaf 50 --reps 5")
        );
    }

    #[test]
    fn unknown_flag_is_a_usage_error() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        assert_eq!(run(args("svct simulate --bogus 1"), &mut out, &mut err), 1);
        assert!(!err.is_empty());
        assert_eq!(run(args("svct --help"), &mut out, &mut err), 0);
    }
}
