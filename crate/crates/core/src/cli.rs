//! Command-line front end: argument definitions and the four subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bench::{run_ab, run_benchmark, BenchConfig, BenchReport};
use crate::dynamics::LegModel;
use crate::error::{Error, Result};
use crate::observer::{EstimatorConfig, ObserverKind, ObserverOutput};
use crate::sim::{config_hash, simulate_with, ControllerKind, Scenario, ScenarioTrace, SCHEMA_VERSION};

#[derive(Parser, Debug)]
#[command(name = "contact-imm", version, about = "Contact-mode and external-force estimation for a simulated swing leg")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate a scenario and write the ground-truth trace.
    Simulate(SimulateArgs),
    /// Replay a trace's noisy readings through one or more observers.
    Estimate(EstimateArgs),
    /// Benchmark observers over a batch of collision scenarios.
    Bench(BenchArgs),
    /// Compare admittance and operational-space swing control on a batch.
    AbControl(AbArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// Scenario JSON (bench and ab-control also accept an array of scenarios).
    #[arg(long, value_name = "PATH")]
    pub scenario: Option<PathBuf>,
    /// Leg model JSON; defaults to the built-in 3-DoF leg.
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
    /// Estimator configuration JSON.
    #[arg(long = "estimator-config", value_name = "PATH")]
    pub estimator_config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Seed override.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_parser = parse_controller)]
    pub controller: Option<ControllerKind>,
}

#[derive(Args, Debug, Clone)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Trace CSV written by `simulate`.
    #[arg(long, value_name = "PATH")]
    pub trace: PathBuf,
    /// Comma-separated observer names or `all`.
    #[arg(long, default_value = "all")]
    pub observers: String,
}

#[derive(Args, Debug, Clone)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value = "all")]
    pub observers: String,
    /// Batch layout JSON (scenario count, collisions per scenario, mismatch, windows).
    #[arg(long = "bench-config", value_name = "PATH")]
    pub bench_config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct AbArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Run only one controller instead of both.
    #[arg(long, value_parser = parse_controller)]
    pub controller: Option<ControllerKind>,
    #[arg(long = "bench-config", value_name = "PATH")]
    pub bench_config: Option<PathBuf>,
}

fn parse_controller(s: &str) -> std::result::Result<ControllerKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// What a command produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
    /// Human-readable summary for stdout.
    pub summary: String,
    /// Set when an observer diverged; the process should exit with code 1.
    pub diverged: bool,
}

/// 1 for numerical divergence, 2 for usage, configuration and input errors.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Diverged { .. } | Error::ObserverDiverged(_) | Error::SingularDynamics => 1,
        _ => 2,
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::AbControl(a) => cmd_ab_control(a),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("cannot read `{}`: {e}", path.display())))
}

fn load_model(common: &CommonArgs) -> Result<LegModel> {
    match &common.model {
        Some(p) => LegModel::from_json(&read_text(p)?),
        None => Ok(LegModel::default()),
    }
}

fn load_estimator(common: &CommonArgs) -> Result<EstimatorConfig> {
    match &common.estimator_config {
        Some(p) => EstimatorConfig::from_json(&read_text(p)?),
        None => Ok(EstimatorConfig::default()),
    }
}

fn load_bench(path: &Option<PathBuf>) -> Result<BenchConfig> {
    let cfg: BenchConfig = match path {
        Some(p) => serde_json::from_str(&read_text(p)?).map_err(|e| Error::config("bench config", e.to_string()))?,
        None => BenchConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn load_scenario(common: &CommonArgs) -> Result<Scenario> {
    match (&common.scenario, common.seed) {
        (Some(p), seed) => {
            let mut sc = Scenario::from_json(&read_text(p)?)?;
            if let Some(seed) = seed {
                sc.seed = seed;
            }
            Ok(sc)
        }
        (None, Some(seed)) => Ok(Scenario::collision_course(3, seed)),
        (None, None) => Ok(Scenario::default()),
    }
}

/// A scenario file holding either one scenario or an array; otherwise the default batch.
fn load_batch(common: &CommonArgs, bench: &BenchConfig) -> Result<Vec<Scenario>> {
    let Some(path) = &common.scenario else {
        return Ok(bench.batch(common.seed.unwrap_or(0)));
    };
    let text = read_text(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::config("scenario", e.to_string()))?;
    let mut batch = match value {
        serde_json::Value::Array(items) => items
            .into_iter()
            .map(|v| Scenario::from_json(&v.to_string()))
            .collect::<Result<Vec<_>>>()?,
        _ => vec![Scenario::from_json(&text)?],
    };
    if batch.is_empty() {
        return Err(Error::config("scenario", "scenario list is empty"));
    }
    if let Some(seed) = common.seed {
        for (i, sc) in batch.iter_mut().enumerate() {
            sc.seed = seed.wrapping_add(i as u64);
        }
    }
    Ok(batch)
}

fn write(path: PathBuf, contents: &[u8], written: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, contents).map_err(|e| Error::InvalidArgument(format!("cannot write `{}`: {e}", path.display())))?;
    written.push(path);
    Ok(())
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::InvalidArgument(format!("cannot create `{}`: {e}", dir.display())))
}

#[derive(Serialize)]
struct RunMetadata<T: Serialize> {
    schema_version: u32,
    seed: u64,
    config_hash: String,
    #[serde(flatten)]
    extra: T,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<Outcome> {
    let model = load_model(&args.common)?;
    let est = load_estimator(&args.common)?;
    let mut scenario = load_scenario(&args.common)?;
    if let Some(kind) = args.controller {
        scenario.controller.kind = kind;
    }
    let trace = simulate_with(&scenario, &model, &est)?;
    prepare_out(&args.common.out)?;
    let mut written = Vec::new();
    let mut csv = Vec::new();
    trace.write_csv(&mut csv)?;
    write(args.common.out.join("trace.csv"), &csv, &mut written)?;
    let meta = trace.metadata(scenario.seed, config_hash(&(&scenario, &model))?);
    write(args.common.out.join("trace.meta.json"), serde_json::to_string_pretty(&meta)?.as_bytes(), &mut written)?;
    let collisions = crate::metrics::episodes(&trace.modes(), crate::observers::ContactMode::Collision).len();
    Ok(Outcome {
        summary: format!("simulated {} ticks, {} collision episodes", trace.records.len(), collisions),
        written,
        diverged: false,
    })
}

fn estimate_columns(n: usize) -> Vec<String> {
    let mut cols: Vec<String> = ["t", "fhat_x", "fhat_y", "fhat_z"].iter().map(|s| s.to_string()).collect();
    cols.extend((0..n).map(|i| format!("p_hat{i}")));
    cols.extend(["mu_swing", "mu_stance", "mu_collision", "mode"].iter().map(|s| s.to_string()));
    cols
}

fn estimate_row(out: &ObserverOutput, n: usize) -> Vec<String> {
    let mut row = vec![out.t.to_string()];
    row.extend(out.force.iter().map(f64::to_string));
    match &out.momentum {
        Some(p) => row.extend(p.iter().map(f64::to_string)),
        None => row.extend(std::iter::repeat_n(String::new(), n)),
    }
    match out.mu {
        Some(mu) => row.extend(mu.iter().map(f64::to_string)),
        None => row.extend(std::iter::repeat_n(String::new(), 3)),
    }
    row.push(out.mode.name().to_string());
    row
}

/// Replays a trace through `kind` and renders the estimate CSV.
pub fn estimate_csv(trace: &ScenarioTrace, kind: ObserverKind, model_hat: &LegModel, cfg: &EstimatorConfig) -> Result<Vec<u8>> {
    let mut observer = cfg.build(kind, model_hat)?;
    let n = trace.n_dof;
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
    w.write_record(estimate_columns(n)).map_err(io)?;
    for reading in trace.readings() {
        let out = observer.observe(reading)?;
        w.write_record(estimate_row(&out, n)).map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

pub fn cmd_estimate(args: &EstimateArgs) -> Result<Outcome> {
    let observers = ObserverKind::parse_list(&args.observers)?;
    let model = load_model(&args.common)?;
    let cfg = load_estimator(&args.common)?;
    let model_hat = match &args.common.scenario {
        Some(_) => load_scenario(&args.common)?.estimator_model(&model),
        None => model,
    };
    let file = fs::File::open(&args.trace).map_err(|e| Error::InvalidArgument(format!("cannot read `{}`: {e}", args.trace.display())))?;
    let trace = ScenarioTrace::read_csv(file)?;
    if trace.n_dof != model_hat.n_dof {
        return Err(Error::config("model", format!("trace has {} joints, model has {}", trace.n_dof, model_hat.n_dof)));
    }
    prepare_out(&args.common.out)?;
    let mut written = Vec::new();
    for kind in &observers {
        let bytes = estimate_csv(&trace, *kind, &model_hat, &cfg)?;
        write(args.common.out.join(format!("estimate_{}.csv", kind.name())), &bytes, &mut written)?;
    }
    Ok(Outcome {
        summary: format!("replayed {} readings through {} observer(s)", trace.records.len(), observers.len()),
        written,
        diverged: false,
    })
}

#[derive(Serialize)]
struct BatchInfo {
    scenarios: usize,
    observers: Vec<ObserverKind>,
}

fn bench_report(args: &BenchArgs) -> Result<(BenchReport, RunMetadata<BatchInfo>)> {
    let observers = ObserverKind::parse_list(&args.observers)?;
    let model = load_model(&args.common)?;
    let cfg = load_estimator(&args.common)?;
    let bench = load_bench(&args.bench_config)?;
    let batch = load_batch(&args.common, &bench)?;
    let report = run_benchmark(&observers, &batch, &model, &cfg, &bench)?;
    let meta = RunMetadata {
        schema_version: SCHEMA_VERSION,
        seed: args.common.seed.unwrap_or(0),
        config_hash: config_hash(&(&batch, &model, &cfg, &bench))?,
        extra: BatchInfo {
            scenarios: batch.len(),
            observers,
        },
    };
    Ok((report, meta))
}

pub fn cmd_bench(args: &BenchArgs) -> Result<Outcome> {
    let (report, meta) = bench_report(args)?;
    prepare_out(&args.common.out)?;
    let mut written = Vec::new();
    write(args.common.out.join("bench_observers.csv"), report.observers_csv().as_bytes(), &mut written)?;
    let table = report.to_table();
    write(args.common.out.join("bench_report.txt"), table.as_bytes(), &mut written)?;
    write(args.common.out.join("bench.meta.json"), serde_json::to_string_pretty(&meta)?.as_bytes(), &mut written)?;
    Ok(Outcome {
        diverged: report.any_diverged(),
        summary: table,
        written,
    })
}

pub fn cmd_ab_control(args: &AbArgs) -> Result<Outcome> {
    let model = load_model(&args.common)?;
    let cfg = load_estimator(&args.common)?;
    let bench = load_bench(&args.bench_config)?;
    let batch = load_batch(&args.common, &bench)?;
    let kinds = match args.controller {
        Some(k) => vec![k],
        None => vec![ControllerKind::Ac, ControllerKind::Osc],
    };
    let report = BenchReport {
        observers: Vec::new(),
        controllers: run_ab(&batch, &model, &cfg, &kinds)?,
    };
    prepare_out(&args.common.out)?;
    let mut written = Vec::new();
    write(args.common.out.join("ab_controllers.csv"), report.controllers_csv().as_bytes(), &mut written)?;
    let table = report.to_table();
    write(args.common.out.join("ab_report.txt"), table.as_bytes(), &mut written)?;
    Ok(Outcome {
        summary: table,
        written,
        diverged: false,
    })
}
