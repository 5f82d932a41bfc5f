//! `quantbound`: distribution-free risk bounds from validation losses.

mod io;
mod method;
mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use quantbound::bounds::SampleSet;
use quantbound::risk::{evaluate_qbrm, MetricKind};
use quantbound::selection::{
    groupwise_select, select_predictor, GroupCorrection, LossMatrix, SelectionConfig,
};
use quantbound::simulation::{run_coverage_experiment, DistributionSpec, SyntheticDistribution, RNG_ALGORITHM};
use serde::{Deserialize, Serialize};

use crate::method::{parse_method, parse_metric, parse_x_plus, resolve_x_plus};
use crate::report::{
    metric_entry, warnings_for, BoundReport, CriticalReport, Provenance, SelectReport,
    SelectionEntry, SimulationRow, StepBound,
};

#[derive(Parser)]
#[command(name = "quantbound", version, about = "Distribution-free bounds on quantile-based risk measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bound the loss CDF of one predictor and report metric bounds.
    Bound(BoundArgs),
    /// Choose the predictor with the smallest target bound.
    Select(SelectArgs),
    /// Run a coverage experiment on a synthetic loss distribution.
    Simulate(SimulateArgs),
    /// Print the critical value and boundary for a method.
    Critical(CriticalArgs),
}

#[derive(Args)]
struct OutputArgs {
    /// Where to write the JSON report; it is always printed to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Directory for `<command>.json` when --output is not given.
    #[arg(long, env = "QUANTBOUND_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    /// Write a plot-ready CSV export here.
    #[arg(long)]
    export_csv: Option<PathBuf>,
}

impl OutputArgs {
    fn report_path(&self, command: &str) -> Option<PathBuf> {
        self.output
            .clone()
            .or_else(|| self.output_dir.as_ref().map(|d| d.join(format!("{command}.json"))))
    }
}

#[derive(Args)]
struct BoundingArgs {
    /// ks, bj, bj-one-sided[:B], bj-two-sided[:A,B], dkw or order-stats.
    #[arg(long, default_value = "bj")]
    method: String,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Metric that drives truncation levels, grids and selection.
    #[arg(long, default_value = "mean", value_parser = parse_metric)]
    target: MetricKind,
    /// Additional metric to report (repeatable): mean, var:B, cvar:B, interval:A,B.
    #[arg(long = "metric", value_parser = parse_metric)]
    metrics: Vec<MetricKind>,
    /// Known upper bound on the loss, or `inf`.
    #[arg(long, value_parser = parse_x_plus)]
    x_plus: Option<f64>,
    /// Losses lie in [0, 1]; sets x_plus = 1.
    #[arg(long)]
    bounded_unit_loss: bool,
    /// Number of quantile levels for dkw and order-stats.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    grid_size: Option<u64>,
}

impl BoundingArgs {
    fn all_metrics(&self) -> Vec<MetricKind> {
        let mut all = vec![self.target];
        all.extend(self.metrics.iter().filter(|m| **m != self.target));
        all
    }

    fn selection_config(&self) -> Result<SelectionConfig> {
        let method = parse_method(&self.method, &self.target, self.grid_size.map(|g| g as usize))?;
        let x_plus = resolve_x_plus(self.x_plus, self.bounded_unit_loss, &self.target)?;
        Ok(SelectionConfig {
            method,
            delta: self.delta,
            target: self.target,
            report_metrics: self.metrics.clone(),
            x_plus,
        })
    }
}

#[derive(Args)]
struct BoundArgs {
    /// CSV file with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Loss column; may be omitted when the file has a single column.
    #[arg(long)]
    column: Option<String>,
    #[command(flatten)]
    bounding: BoundingArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SelectArgs {
    /// CSV file with one column per predictor, headed by its label.
    #[arg(long)]
    input: PathBuf,
    /// Column holding group labels; selection runs separately per group.
    #[arg(long)]
    group_column: Option<String>,
    /// Split delta across groups so all group guarantees hold jointly.
    #[arg(long, requires = "group_column")]
    joint_groups: bool,
    #[command(flatten)]
    bounding: BoundingArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML experiment file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// uniform, beta:A,B or point-mass:C.
    #[arg(long)]
    distribution: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Method to evaluate (repeatable).
    #[arg(long = "method")]
    methods: Vec<String>,
    /// Metric to check (repeatable).
    #[arg(long = "metric")]
    metrics: Vec<String>,
    #[arg(long)]
    grid_size: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CriticalArgs {
    #[arg(long, default_value = "bj")]
    method: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Metric used to derive truncation levels or grids.
    #[arg(long, default_value = "mean", value_parser = parse_metric)]
    target: MetricKind,
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Experiment description, as read from `--config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulationConfig {
    distribution: DistributionSpec,
    n: usize,
    trials: usize,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "default_delta")]
    delta: f64,
    methods: Vec<String>,
    metrics: Vec<String>,
    #[serde(default)]
    grid_size: Option<usize>,
}

fn default_seed() -> u64 {
    0
}

fn default_delta() -> f64 {
    0.05
}

fn parse_distribution(s: &str) -> Result<DistributionSpec> {
    let (name, args) = match s.split_once(':') {
        Some((n, a)) => (n.trim(), Some(a)),
        None => (s.trim(), None),
    };
    let num = |v: &str| v.trim().parse::<f64>().with_context(|| format!("bad number in {s:?}"));
    Ok(match (name, args) {
        ("uniform", None) => DistributionSpec::Uniform,
        ("beta", Some(a)) => {
            let (x, y) = a.split_once(',').with_context(|| format!("{s:?}: expected beta:A,B"))?;
            DistributionSpec::Beta { a: num(x)?, b: num(y)? }
        }
        ("point-mass", Some(a)) => DistributionSpec::PointMass { value: num(a)? },
        _ => bail!("unknown distribution {s:?}; expected uniform, beta:A,B or point-mass:C"),
    })
}

fn emit(output: Option<&Path>, value: &impl Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    if let Some(path) = output {
        io::write_json(path, value)?;
    }
    Ok(())
}

fn run_bound(args: BoundArgs) -> Result<()> {
    let table = io::read_table(&args.input, None)?;
    let idx = match &args.column {
        Some(c) => table
            .columns
            .iter()
            .position(|h| h == c)
            .with_context(|| format!("column {c:?} not found in {}", args.input.display()))?,
        None if table.columns.len() == 1 => 0,
        None => bail!(
            "{} has {} columns; choose one with --column",
            args.input.display(),
            table.columns.len()
        ),
    };
    let config = args.bounding.selection_config()?;
    let samples = SampleSet::new(table.values[idx].clone())?;
    let calibration = config.method.calibrate(samples.len(), config.delta)?;
    let g = calibration.bound(&samples, config.x_plus)?;
    let metrics = args
        .bounding
        .all_metrics()
        .iter()
        .map(|m| Ok(metric_entry(m, evaluate_qbrm(&g, &m.weight()?))))
        .collect::<Result<Vec<_>>>()?;
    let report = BoundReport {
        command: "bound".into(),
        provenance: Provenance::new(&calibration, config.delta, 1),
        column: table.columns[idx].clone(),
        bound: StepBound::from(&g),
        warnings: warnings_for(&metrics, ""),
        metrics,
    };
    if let Some(path) = &args.output.export_csv {
        io::write_csv(path, &io::bound_rows(&g, None))?;
    }
    emit(args.output.report_path("bound").as_deref(), &report)
}

fn run_select(args: SelectArgs) -> Result<()> {
    let table = io::read_table(&args.input, args.group_column.as_deref())?;
    let config = args.bounding.selection_config()?;
    let rows = table
        .values
        .into_iter()
        .map(SampleSet::new)
        .collect::<quantbound::Result<Vec<_>>>()?;
    let losses = LossMatrix::new(table.columns, rows)?;

    let report = match table.groups {
        None => {
            let r = select_predictor(&losses, &config)?;
            if let Some(path) = &args.output.export_csv {
                io::write_csv(path, &io::bound_rows(&r.chosen_bound, None))?;
            }
            SelectReport {
                command: "select".into(),
                selection: Some(SelectionEntry::from(&r)),
                group_column: None,
                joint_groups: None,
                groups: None,
            }
        }
        Some(groups) => {
            let correction = if args.joint_groups { GroupCorrection::Joint } else { GroupCorrection::PerGroup };
            let reports = groupwise_select(&losses, &groups, &config, correction)?;
            if let Some(path) = &args.output.export_csv {
                let rows: Vec<_> = reports
                    .iter()
                    .flat_map(|(g, r)| io::bound_rows(&r.chosen_bound, Some(g.as_str())))
                    .collect();
                io::write_csv(path, &rows)?;
            }
            SelectReport {
                command: "select".into(),
                selection: None,
                group_column: args.group_column.clone(),
                joint_groups: Some(args.joint_groups),
                groups: Some(reports.iter().map(|(g, r)| (g.clone(), SelectionEntry::from(r))).collect::<BTreeMap<_, _>>()),
            }
        }
    };
    emit(args.output.report_path("select").as_deref(), &report)
}

fn simulation_config(args: &SimulateArgs) -> Result<SimulationConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            toml::from_str::<SimulationConfig>(&text)
                .with_context(|| format!("invalid experiment file {}", path.display()))?
        }
        None => SimulationConfig {
            distribution: DistributionSpec::Uniform,
            n: 100,
            trials: 1000,
            seed: default_seed(),
            delta: default_delta(),
            methods: vec!["bj".into()],
            metrics: vec!["mean".into()],
            grid_size: None,
        },
    };
    if let Some(d) = &args.distribution {
        config.distribution = parse_distribution(d)?;
    }
    config.n = args.n.unwrap_or(config.n);
    config.trials = args.trials.unwrap_or(config.trials);
    config.seed = args.seed.unwrap_or(config.seed);
    config.delta = args.delta.unwrap_or(config.delta);
    config.grid_size = args.grid_size.or(config.grid_size);
    if !args.methods.is_empty() {
        config.methods = args.methods.clone();
    }
    if !args.metrics.is_empty() {
        config.metrics = args.metrics.clone();
    }
    if config.methods.is_empty() || config.metrics.is_empty() {
        bail!("experiment needs at least one method and one metric");
    }
    Ok(config)
}

#[derive(Serialize)]
struct SimulateReport {
    command: String,
    rng: String,
    config: SimulationConfig,
    results: Vec<SimulationRow>,
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let config = simulation_config(&args)?;
    let dist = SyntheticDistribution::try_from(config.distribution.clone())?;
    let metrics = config
        .metrics
        .iter()
        .map(|m| m.parse::<MetricKind>())
        .collect::<quantbound::Result<Vec<_>>>()?;
    let mut results = Vec::new();
    for name in &config.methods {
        let method = parse_method(name, &metrics[0], config.grid_size)?;
        let stats = run_coverage_experiment(
            &dist,
            config.n,
            config.trials,
            &method,
            config.delta,
            &metrics,
            config.seed,
        )?;
        for (metric, v) in metrics.iter().zip(&stats.metric_violations) {
            results.push(SimulationRow {
                method: name.clone(),
                metric: metric.to_string(),
                loss_violation_rate: v.count as f64 / stats.trials as f64,
                lcb_violation_rate: stats.lcb_rate(),
                trials: stats.trials,
                implication_failures: stats.implication_failures,
            });
        }
    }
    if let Some(path) = &args.output.export_csv {
        io::write_csv(path, &results)?;
    }
    let report = SimulateReport {
        command: "simulate".into(),
        rng: RNG_ALGORITHM.into(),
        config,
        results,
    };
    emit(args.output.report_path("simulate").as_deref(), &report)
}

fn run_critical(args: CriticalArgs) -> Result<()> {
    let method = parse_method(&args.method, &args.target, args.grid_size)?;
    let calibration = method.calibrate(args.n, args.delta)?;
    let report = CriticalReport {
        command: "critical".into(),
        provenance: Provenance::new(&calibration, args.delta, 1),
        boundary: calibration.boundary.as_slice().to_vec(),
    };
    emit(args.output.as_deref(), &report)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let infeasible = err
        .chain()
        .filter_map(|e| e.downcast_ref::<quantbound::Error>())
        .any(quantbound::Error::is_infeasible);
    if infeasible {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Bound(a) => run_bound(a),
        Command::Select(a) => run_select(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Critical(a) => run_critical(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
