//! `vinehedge` command line. Every command writes its outputs and a
//! `manifest.json` into the `--out` directory.
//!
//! Exit codes: 0 on success, 1 for invalid input or configuration, 2 for
//! failures while running.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use super::{
    backtest, frontier, timestamp, write_backtest_csv, write_frontier_csv, Config, FileDigest,
    FrontierPoint, Manifest,
};
use crate::error::{Error, Result};
use crate::ga::{self, write_trace_csv};
use crate::model::{Instance, Residuals, Solution};
use crate::panel::{load_panel, ReturnPanel};
use crate::rvine::SelectOptions;
use crate::scenarios::{
    generate_mvn, generate_rvc, stability_report, Method, RvcModel, ScenarioMeta, ScenarioSet,
    StabilityOptions, StabilityRow,
};

#[derive(Parser, Debug)]
#[command(
    name = "vinehedge",
    version,
    about = "Vine-copula scenarios and CVaR portfolio optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit KDE marginals and an R-vine to the in-sample panel.
    FitVine(RunArgs),
    /// Generate a scenario set from the in-sample panel.
    GenScenarios(RunArgs),
    /// Solve the instance at one return target.
    Optimize(RunArgs),
    /// Solve the instance over the return-target grid.
    Frontier(RunArgs),
    /// Apply a solution's first-stage allocation to the out-of-sample panel.
    Backtest(RunArgs),
    /// Optimal-CVaR statistics across scenario-set sizes.
    Stability(RunArgs),
    /// Re-run the command recorded in a manifest and check its outputs.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// rvc or mvn
    #[arg(long)]
    method: Option<String>,
    /// Number of scenarios.
    #[arg(long)]
    n: Option<usize>,
    /// Return target.
    #[arg(long)]
    mu: Option<f64>,
    /// Maximum number of currencies invested in.
    #[arg(long)]
    kc: Option<usize>,
    /// Maximum number of forward trades.
    #[arg(long)]
    kg: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    panel: Option<PathBuf>,
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Scenario CSV to use instead of generating from the panel.
    #[arg(long)]
    scenarios: Option<PathBuf>,
    /// Solution JSON written by `optimize`.
    #[arg(long)]
    solution: Option<PathBuf>,
}

const PATH_FLAGS: [&str; 5] = [
    "--config",
    "--panel",
    "--instance",
    "--scenarios",
    "--solution",
];

pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::Io { .. }
        | Error::NonConvergence(_)
        | Error::FitFailure(_)
        | Error::CovarianceFailure(_)
        | Error::ReplayMismatch(_) => 2,
        _ => 1,
    }
}

/// Runs the CLI on the process arguments and returns the exit code.
pub fn main_entry() -> i32 {
    run(std::env::args_os())
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let argv: Vec<String> = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command, argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command, argv: Vec<String>) -> Result<()> {
    match command {
        Command::Replay { manifest, out } => replay(&manifest, &out),
        cmd => execute(cmd, absolute_args(&argv), timestamp()),
    }
}

struct Run {
    command: &'static str,
    args: RunArgs,
    argv: Vec<String>,
    cfg: Config,
    timestamp: String,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

fn resolve(a: &RunArgs) -> Result<Config> {
    let mut cfg = match &a.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(m) = &a.method {
        cfg.method.clone_from(m);
    }
    if let Some(n) = a.n {
        cfg.n_scenarios = n;
    }
    if a.mu.is_some() {
        cfg.mu = a.mu;
    }
    if a.kc.is_some() {
        cfg.max_currencies = a.kc;
    }
    if a.kg.is_some() {
        cfg.max_forwards = a.kg;
    }
    if a.panel.is_some() {
        cfg.panel.clone_from(&a.panel);
    }
    if a.instance.is_some() {
        cfg.instance.clone_from(&a.instance);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn missing(key: &str) -> Error {
    Error::Config {
        key: key.into(),
        message: format!("required; set `{key}` in the config or pass --{key}"),
    }
}

impl Run {
    fn new(
        command: &'static str,
        args: RunArgs,
        argv: Vec<String>,
        timestamp: String,
    ) -> Result<Self> {
        let cfg = resolve(&args)?;
        std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
        let inputs = args.config.iter().cloned().collect();
        Ok(Run {
            command,
            args,
            argv,
            cfg,
            timestamp,
            inputs,
            outputs: Vec::new(),
        })
    }

    fn output(&mut self, name: &str) -> PathBuf {
        let p = self.args.out.join(name);
        self.outputs.push(p.clone());
        p
    }

    fn raw_panel(&mut self) -> Result<ReturnPanel> {
        let path = self.cfg.panel.clone().ok_or_else(|| missing("panel"))?;
        self.inputs.push(path.clone());
        load_panel(&path, &self.cfg.base_currency)
    }

    fn split(&self, raw: &ReturnPanel) -> Result<usize> {
        let n = self.cfg.in_sample_periods.unwrap_or(raw.len());
        if n == 0 || n > raw.len() {
            return Err(Error::Config {
                key: "in_sample_periods".into(),
                message: format!("must lie in 1..={} for this panel", raw.len()),
            });
        }
        Ok(n)
    }

    fn in_sample(&mut self) -> Result<ReturnPanel> {
        let raw = self.raw_panel()?;
        let n = self.split(&raw)?;
        raw.slice(0, n).adjust_returns()
    }

    /// Periods after the in-sample window, or the whole panel when no window
    /// is configured.
    fn out_of_sample(&mut self) -> Result<ReturnPanel> {
        let raw = self.raw_panel()?;
        let start = match self.cfg.in_sample_periods {
            Some(_) => self.split(&raw)?,
            None => 0,
        };
        if start == raw.len() {
            return Err(Error::Config {
                key: "in_sample_periods".into(),
                message: "leaves no out-of-sample periods".into(),
            });
        }
        raw.slice(start, raw.len()).adjust_returns()
    }

    fn generate(&mut self) -> Result<ScenarioSet> {
        let panel = self.in_sample()?;
        let (n, seed) = (self.cfg.n_scenarios, self.cfg.seed);
        match self.cfg.method()? {
            Method::Rvc => generate_rvc(&panel, n, &SelectOptions::default(), seed),
            Method::Mvn => generate_mvn(&panel, n, seed),
        }
    }

    fn scenarios(&mut self) -> Result<ScenarioSet> {
        match self.args.scenarios.clone() {
            Some(p) => {
                self.inputs.push(p.clone());
                ScenarioSet::read_csv(&p)
            }
            None => self.generate(),
        }
    }

    fn instance(&mut self) -> Result<Instance> {
        let path = self
            .cfg
            .instance
            .clone()
            .ok_or_else(|| missing("instance"))?;
        self.inputs.push(path.clone());
        self.cfg.load_instance(&path)
    }

    fn finish(self) -> Result<()> {
        let digests = |paths: &[PathBuf]| {
            paths
                .iter()
                .map(|p| FileDigest::of(p))
                .collect::<Result<Vec<_>>>()
        };
        let manifest = Manifest {
            command: self.command.into(),
            args: self.argv.clone(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: self.cfg.seed,
            parameters: serde_json::to_value(&self.cfg)?,
            inputs: digests(&self.inputs)?,
            outputs: digests(&self.outputs)?,
            timestamp: self.timestamp.clone(),
        };
        manifest.write(&self.args.out.join("manifest.json"))
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct OptimizeOutput<'a> {
    mu: f64,
    feasible: bool,
    fitness: f64,
    violation: f64,
    cvar: f64,
    alpha: f64,
    expected_return: f64,
    target_residual: f64,
    first_stage_wealth: f64,
    first_stage_residuals: &'a Residuals,
    recourse_residuals: &'a Residuals,
    solution: &'a Solution,
}

#[derive(Serialize)]
struct FrontierEntry<'a> {
    #[serde(flatten)]
    point: &'a FrontierPoint,
    solution: Option<&'a Solution>,
}

fn read_solution(path: &Path) -> Result<Solution> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)?;
    let inner = value.get_mut("solution").map(serde_json::Value::take);
    Ok(serde_json::from_value(inner.unwrap_or(value))?)
}

fn write_stability_csv(rows: &[StabilityRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn execute(cmd: Command, argv: Vec<String>, stamp: String) -> Result<()> {
    let (name, args) = match cmd {
        Command::FitVine(a) => ("fit-vine", a),
        Command::GenScenarios(a) => ("gen-scenarios", a),
        Command::Optimize(a) => ("optimize", a),
        Command::Frontier(a) => ("frontier", a),
        Command::Backtest(a) => ("backtest", a),
        Command::Stability(a) => ("stability", a),
        Command::Replay { .. } => {
            return Err(Error::Config {
                key: "command".into(),
                message: "a manifest cannot record a replay".into(),
            })
        }
    };
    let mut run = Run::new(name, args, argv, stamp)?;
    match name {
        "fit-vine" => {
            let panel = run.in_sample()?;
            let model = RvcModel::fit(&panel, &SelectOptions::default())?;
            let out = run.output("vine.json");
            write_json(&model, &out)?;
        }
        "gen-scenarios" => {
            let set = run.generate()?;
            let out = run.output("scenarios.csv");
            set.write_csv(&out)?;
            let meta = ScenarioMeta {
                seed: run.cfg.seed,
                method: run.cfg.method()?,
                n: set.len(),
                timestamp: run.timestamp.clone(),
            };
            let out = run.output("scenarios.json");
            write_json(&meta, &out)?;
        }
        "optimize" => {
            let inst = run.instance()?;
            let set = run.scenarios()?;
            let res = ga::run(&inst, &set, &run.cfg.ga()?)?;
            let ev = &res.evaluation;
            let report = OptimizeOutput {
                mu: inst.params.mu,
                feasible: ev.feasible(),
                fitness: ev.fitness,
                violation: ev.violation,
                cvar: ev.cvar,
                alpha: ev.alpha,
                expected_return: ev.expected_return,
                target_residual: ev.target_residual,
                first_stage_wealth: ev.first.wealth,
                first_stage_residuals: &ev.first.residuals,
                recourse_residuals: &ev.recourse_residuals,
                solution: &res.solution,
            };
            let out = run.output("solution.json");
            write_json(&report, &out)?;
            let out = run.output("trace.csv");
            write_trace_csv(&res.trace, &out)?;
        }
        "frontier" => {
            let inst = run.instance()?;
            let set = run.scenarios()?;
            let grid = match run.cfg.mu {
                Some(mu) => vec![mu],
                None => run.cfg.mu_grid(),
            };
            let points = frontier(&inst, &set, &grid, &run.cfg.ga()?)?;
            let out = run.output("frontier.csv");
            write_frontier_csv(&points, &out)?;
            let entries: Vec<FrontierEntry> = points
                .iter()
                .map(|p| FrontierEntry {
                    point: p,
                    solution: p.solution.as_ref(),
                })
                .collect();
            let out = run.output("frontier.json");
            write_json(&entries, &out)?;
        }
        "backtest" => {
            let inst = run.instance()?;
            let path = run
                .args
                .solution
                .clone()
                .ok_or_else(|| missing("solution"))?;
            run.inputs.push(path.clone());
            let sol = read_solution(&path)?;
            let panel = run.out_of_sample()?;
            let report = backtest(&inst, &sol.first, &panel)?;
            let out = run.output("backtest.csv");
            write_backtest_csv(&report, &out)?;
            let out = run.output("backtest.json");
            write_json(&report, &out)?;
        }
        "stability" => {
            let inst = run.instance()?;
            let panel = run.in_sample()?;
            let cfg = &run.cfg;
            let opts = StabilityOptions {
                sizes: cfg.stability_sizes.clone(),
                seeds: (0..cfg.stability_seeds as u64)
                    .map(|k| cfg.seed + k)
                    .collect(),
                method: cfg.method()?,
                mus: cfg.mu.map_or_else(|| cfg.mu_grid(), |mu| vec![mu]),
                ga: cfg.ga()?,
                select: SelectOptions::default(),
            };
            let rows = stability_report(&panel, &inst, &opts)?;
            let out = run.output("stability.csv");
            write_stability_csv(&rows, &out)?;
        }
        _ => unreachable!("every command is matched above"),
    }
    run.finish()
}

/// Replaces the value of `flag` in `args`, in either `--flag value` or
/// `--flag=value` form.
fn map_flag(args: &mut [String], flag: &str, f: impl Fn(&str) -> String) {
    let prefix = format!("{flag}=");
    let mut i = 0;
    while i < args.len() {
        if args[i] == flag && i + 1 < args.len() {
            args[i + 1] = f(&args[i + 1]);
            i += 1;
        } else if let Some(v) = args[i].strip_prefix(&prefix) {
            args[i] = format!("{prefix}{}", f(v));
        }
        i += 1;
    }
}

/// Path arguments as absolute paths, so a manifest can be replayed from any
/// working directory.
fn absolute_args(args: &[String]) -> Vec<String> {
    let cwd = std::env::current_dir().unwrap_or_default();
    let mut args = args.to_vec();
    for flag in PATH_FLAGS.iter().chain(&["--out"]) {
        map_flag(&mut args, flag, |v| {
            cwd.join(v).to_string_lossy().into_owned()
        });
    }
    args
}

fn replay(manifest_path: &Path, out: &Path) -> Result<()> {
    let recorded = Manifest::read(manifest_path)?;
    let mut args = recorded.args.clone();
    let target = out.to_string_lossy().into_owned();
    map_flag(&mut args, "--out", |_| target.clone());
    let cli =
        Cli::try_parse_from(std::iter::once("vinehedge".to_string()).chain(args.iter().cloned()))
            .map_err(|e| Error::Config {
            key: "args".into(),
            message: e.to_string(),
        })?;
    execute(
        cli.command,
        absolute_args(&args),
        recorded.timestamp.clone(),
    )?;
    for d in &recorded.outputs {
        let name = d.path.file_name().unwrap_or_default();
        let fresh = super::sha256_file(&out.join(name))?;
        if fresh != d.sha256 {
            return Err(Error::ReplayMismatch(name.to_string_lossy().into_owned()));
        }
    }
    Ok(())
}
