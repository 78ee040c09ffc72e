//! Experiment runner: single runs, seed batches, parameter sweeps, and
//! offline action-set optimization, all emitting CSV/JSON artifacts.

use alan_core::actions::{ActionSet, Strategy};
use alan_core::engine::{run, EngineConfig, Policy, SimulationResult};
use alan_core::mcmc::{optimize, AnnealSchedule, SimObjective};
use alan_core::metrics::{interaction_overhead, min_ttime, ttime_with_cap, MetricsReport};
use alan_core::scenarios::{builtin_scenario, default_agent_count, BUILTIN_SCENARIOS};
use alan_core::world::Scenario;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_RUNTIME: u8 = 1;
const EXIT_INVALID: u8 = 2;

#[derive(Parser)]
#[command(name = "alan", version, about = "Multi-agent navigation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one seed and write a trajectory trace plus a summary.
    Run(RunArgs),
    /// Simulate seeds 0..N and write per-seed metrics plus an aggregate.
    Batch(BatchArgs),
    /// Batch once per value of a config parameter.
    Sweep(SweepArgs),
    /// Search for an action set minimizing travel time on training scenarios.
    Optimize(OptimizeArgs),
    /// List the builtin scenarios.
    Scenarios,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Builtin scenario name.
    #[arg(long, conflicts_with = "scenario_file")]
    scenario: Option<String>,
    /// Scenario description file (JSON).
    #[arg(long)]
    scenario_file: Option<PathBuf>,
    /// alan | orca | random:<period> | epsilon | ucb
    #[arg(long, default_value = "alan")]
    policy: String,
    /// Action set: sample | multi | <file.json>
    #[arg(long, default_value = "sample")]
    actions: String,
    /// Coordination factor (politeness weight).
    #[arg(long)]
    gamma: Option<f64>,
    /// Softmax temperature.
    #[arg(long)]
    tau: Option<f64>,
    /// Reward window length (s).
    #[arg(long)]
    window: Option<f64>,
    /// Simulation timestep (s).
    #[arg(long)]
    dt: Option<f64>,
    /// Simulation time cap (s); default scales with scenario size.
    #[arg(long)]
    time_cap: Option<f64>,
    /// Probability that an action re-selection fails.
    #[arg(long)]
    failure_prob: Option<f64>,
    /// Override the builtin scenario's agent count.
    #[arg(long)]
    agents: Option<usize>,
    /// Directory for output artifacts.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Record every k-th step in the trace (0 disables tracing).
    #[arg(long, default_value_t = 1)]
    trace_every: usize,
}

#[derive(Args)]
struct BatchArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of seeds (0..N-1).
    #[arg(long, default_value_t = 30)]
    seeds: u64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// gamma | window | agents | failure_prob
    #[arg(long)]
    axis: String,
    /// Comma-separated values for the axis.
    #[arg(long)]
    values: String,
    #[arg(long, default_value_t = 30)]
    seeds: u64,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Training scenarios (repeatable); defaults to --scenario or "incoming".
    #[arg(long = "train")]
    train: Vec<String>,
    #[arg(long, default_value_t = 300)]
    iterations: usize,
    /// Objective evaluations per candidate at the start/end of the chain.
    #[arg(long, default_value_t = 3)]
    evals_start: usize,
    #[arg(long, default_value_t = 10)]
    evals_end: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn unknown_scenario(name: &str) -> String {
    let names: Vec<&str> = BUILTIN_SCENARIOS.iter().map(|(n, _)| *n).collect();
    format!("unknown scenario '{name}'; valid names: {}", names.join(", "))
}

fn invalid(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_INVALID)
}

fn runtime(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_RUNTIME)
}

enum PolicySpec {
    Fixed(Policy),
    Bandit(Strategy),
}

fn parse_policy(s: &str) -> Result<PolicySpec, String> {
    match s {
        "alan" => Ok(PolicySpec::Bandit(Strategy::Softmax)),
        "epsilon" => Ok(PolicySpec::Bandit(Strategy::EpsilonGreedy)),
        "ucb" => Ok(PolicySpec::Bandit(Strategy::Ucb)),
        "orca" => Ok(PolicySpec::Fixed(Policy::OrcaOnly)),
        other => {
            if let Some(period) = other.strip_prefix("random:") {
                let period: f64 = period
                    .parse()
                    .map_err(|_| format!("invalid random period '{period}'"))?;
                if period <= 0.0 {
                    return Err("random period must be positive".into());
                }
                Ok(PolicySpec::Fixed(Policy::RandomAction { period }))
            } else {
                Err(format!(
                    "unknown policy '{other}' (alan | orca | random:<period> | epsilon | ucb)"
                ))
            }
        }
    }
}

fn load_actions(spec: &str) -> Result<ActionSet, String> {
    match spec {
        "sample" => Ok(ActionSet::sample()),
        "multi" => Ok(ActionSet::multi_scenario()),
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read action set '{path}': {e}"))?;
            ActionSet::load(&text).map_err(|e| format!("invalid action set '{path}': {e}"))
        }
    }
}

#[derive(Clone)]
struct Experiment {
    scenario_name: String,
    scenario_file: Option<PathBuf>,
    agents: Option<usize>,
    policy: Policy,
    policy_label: String,
    actions: ActionSet,
    actions_label: String,
    cfg: EngineConfig,
    out_dir: PathBuf,
}

impl Experiment {
    fn from_common(common: &CommonArgs) -> Result<Experiment, String> {
        let mut cfg = EngineConfig::default();
        if let Some(g) = common.gamma {
            if !(0.0..=1.0).contains(&g) {
                return Err("gamma must be in [0, 1]".into());
            }
            cfg.selection.gamma = g;
        }
        if let Some(t) = common.tau {
            if t <= 0.0 {
                return Err("tau must be positive".into());
            }
            cfg.selection.temperature = t;
        }
        if let Some(w) = common.window {
            if w <= 0.0 {
                return Err("window must be positive".into());
            }
            cfg.selection.window_length = w;
        }
        if let Some(dt) = common.dt {
            if dt <= 0.0 {
                return Err("dt must be positive".into());
            }
            cfg.dt = dt;
        }
        if let Some(cap) = common.time_cap {
            if cap <= 0.0 {
                return Err("time-cap must be positive".into());
            }
            cfg.time_cap = Some(cap);
        }
        if let Some(p) = common.failure_prob {
            if !(0.0..=1.0).contains(&p) {
                return Err("failure-prob must be in [0, 1]".into());
            }
            cfg.actuator_failure_prob = p;
        }
        let policy = match parse_policy(&common.policy)? {
            PolicySpec::Fixed(p) => p,
            PolicySpec::Bandit(strategy) => {
                cfg.selection.strategy = strategy;
                Policy::Alan
            }
        };
        let actions = load_actions(&common.actions)?;
        let scenario_name = match (&common.scenario, &common.scenario_file) {
            (Some(name), None) => name.clone(),
            (None, Some(path)) => path.display().to_string(),
            (None, None) => return Err("one of --scenario or --scenario-file is required".into()),
            (Some(_), Some(_)) => unreachable!("clap enforces the conflict"),
        };
        Ok(Experiment {
            scenario_name,
            scenario_file: common.scenario_file.clone(),
            agents: common.agents,
            policy,
            policy_label: common.policy.clone(),
            actions,
            actions_label: common.actions.clone(),
            cfg,
            out_dir: common.out_dir.clone(),
        })
    }

    /// Scenario for one seed. Builtins may be seed-dependent (crowd).
    fn scenario(&self, seed: u64) -> Result<Scenario, String> {
        match &self.scenario_file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("cannot read scenario '{}': {e}", path.display()))?;
                Scenario::load(&text)
                    .map_err(|e| format!("invalid scenario '{}': {e}", path.display()))
            }
            None => {
                let name = &self.scenario_name;
                let n = self
                    .agents
                    .or_else(|| default_agent_count(name))
                    .ok_or_else(|| unknown_scenario(name))?;
                builtin_scenario(name, n, seed).map_err(|e| e.to_string())
            }
        }
    }

    fn run_seed(&self, seed: u64, trace_every: usize) -> Result<(Scenario, SimulationResult), String> {
        let scenario = self.scenario(seed)?;
        let cfg = EngineConfig {
            seed,
            trace_every,
            ..self.cfg
        };
        let result = run(&scenario, &self.actions, self.policy, cfg);
        Ok((scenario, result))
    }

    fn ensure_out_dir(&self) -> Result<(), String> {
        std::fs::create_dir_all(&self.out_dir)
            .map_err(|e| format!("cannot create '{}': {e}", self.out_dir.display()))
    }

    fn write(&self, file: &str, contents: &str) -> Result<PathBuf, String> {
        let path = self.out_dir.join(file);
        std::fs::write(&path, contents).map_err(|e| format!("cannot write '{}': {e}", path.display()))?;
        Ok(path)
    }
}

#[derive(Serialize)]
struct RunSummary<'a> {
    scenario: &'a str,
    policy: &'a str,
    actions: &'a str,
    seed: u64,
    config: EngineConfig,
    completed: bool,
    duration: f64,
    time_cap: f64,
    arrival_times: Vec<Option<f64>>,
    metrics: MetricsReport,
}

fn trace_csv(result: &SimulationResult) -> String {
    let mut out = String::from("t,agent_id,x,y,vx,vy,action_id\n");
    for row in &result.trace {
        let _ = writeln!(
            out,
            "{:.3},{},{:.6},{:.6},{:.6},{:.6},{}",
            row.t, row.agent_id, row.x, row.y, row.vx, row.vy, row.action_id
        );
    }
    out
}

fn cmd_run(args: &RunArgs) -> ExitCode {
    let exp = match Experiment::from_common(&args.common) {
        Ok(e) => e,
        Err(e) => return invalid(e),
    };
    let (scenario, result) = match exp.run_seed(args.seed, args.trace_every) {
        Ok(r) => r,
        Err(e) => return invalid(e),
    };
    let metrics = match interaction_overhead(&result, &scenario) {
        Ok(m) => m,
        Err(e) => return invalid(e),
    };
    if let Err(e) = exp.ensure_out_dir() {
        return runtime(e);
    }
    let summary = RunSummary {
        scenario: &exp.scenario_name,
        policy: &exp.policy_label,
        actions: &exp.actions_label,
        seed: args.seed,
        config: EngineConfig {
            seed: args.seed,
            trace_every: args.trace_every,
            ..exp.cfg
        },
        completed: result.completed,
        duration: result.duration,
        time_cap: result.time_cap,
        arrival_times: result.arrival_times.clone(),
        metrics,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serialization cannot fail");
    if let Err(e) = exp.write("summary.json", &json) {
        return runtime(e);
    }
    if args.trace_every > 0 {
        if let Err(e) = exp.write("trace.csv", &trace_csv(&result)) {
            return runtime(e);
        }
    }
    match summary.metrics.interaction_overhead {
        Some(ov) => println!("interaction overhead: {ov:.3}"),
        None => {
            let arrived = result.arrival_times.iter().flatten().count();
            println!(
                "incomplete ({arrived}/{} arrived by t={:.1})",
                result.arrival_times.len(),
                result.time_cap
            );
        }
    }
    ExitCode::SUCCESS
}

struct SeedOutcome {
    seed: u64,
    report: MetricsReport,
    penalized: f64,
}

fn run_batch(exp: &Experiment, seeds: u64) -> Result<Vec<SeedOutcome>, String> {
    let mut outcomes = Vec::with_capacity(seeds as usize);
    for seed in 0..seeds {
        let (scenario, result) = exp.run_seed(seed, 0)?;
        let report = interaction_overhead(&result, &scenario).map_err(|e| e.to_string())?;
        let penalized = ttime_with_cap(&result) - min_ttime(&scenario).map_err(|e| e.to_string())?;
        outcomes.push(SeedOutcome {
            seed,
            report,
            penalized,
        });
    }
    Ok(outcomes)
}

fn metrics_csv(exp: &Experiment, outcomes: &[SeedOutcome]) -> String {
    let mut out = String::from("scenario,policy,seed,overhead,mean,stdev,completed\n");
    let fmt = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_default();
    for o in outcomes {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            exp.scenario_name,
            exp.policy_label,
            o.seed,
            fmt(o.report.interaction_overhead),
            fmt(o.report.mean),
            fmt(o.report.stdev),
            o.report.completed
        );
    }
    out
}

#[derive(Serialize)]
struct BatchAggregate<'a> {
    scenario: &'a str,
    policy: &'a str,
    actions: &'a str,
    seeds: u64,
    completion_rate: f64,
    /// Mean overhead over completed runs, if any completed.
    mean_overhead: Option<f64>,
    /// Mean overhead with incomplete runs charged the time cap.
    mean_penalized_overhead: f64,
    config: EngineConfig,
}

fn aggregate<'a>(exp: &'a Experiment, seeds: u64, outcomes: &[SeedOutcome]) -> BatchAggregate<'a> {
    let completed: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| o.report.interaction_overhead)
        .collect();
    let mean_overhead = if completed.is_empty() {
        None
    } else {
        Some(completed.iter().sum::<f64>() / completed.len() as f64)
    };
    let mean_penalized =
        outcomes.iter().map(|o| o.penalized).sum::<f64>() / outcomes.len().max(1) as f64;
    BatchAggregate {
        scenario: &exp.scenario_name,
        policy: &exp.policy_label,
        actions: &exp.actions_label,
        seeds,
        completion_rate: completed.len() as f64 / outcomes.len().max(1) as f64,
        mean_overhead,
        mean_penalized_overhead: mean_penalized,
        config: exp.cfg,
    }
}

fn cmd_batch(args: &BatchArgs) -> ExitCode {
    if args.seeds == 0 {
        return invalid("--seeds must be at least 1");
    }
    let exp = match Experiment::from_common(&args.common) {
        Ok(e) => e,
        Err(e) => return invalid(e),
    };
    let outcomes = match run_batch(&exp, args.seeds) {
        Ok(o) => o,
        Err(e) => return invalid(e),
    };
    if let Err(e) = exp.ensure_out_dir() {
        return runtime(e);
    }
    if let Err(e) = exp.write("metrics.csv", &metrics_csv(&exp, &outcomes)) {
        return runtime(e);
    }
    let agg = aggregate(&exp, args.seeds, &outcomes);
    let json = serde_json::to_string_pretty(&agg).expect("aggregate serialization cannot fail");
    if let Err(e) = exp.write("aggregate.json", &json) {
        return runtime(e);
    }
    println!(
        "{} / {}: completion {:.0}%, mean overhead {}, penalized {:.3}",
        agg.scenario,
        agg.policy,
        agg.completion_rate * 100.0,
        agg.mean_overhead
            .map(|v| format!("{v:.3}"))
            .unwrap_or_else(|| "n/a".into()),
        agg.mean_penalized_overhead
    );
    ExitCode::SUCCESS
}

fn cmd_sweep(args: &SweepArgs) -> ExitCode {
    if args.seeds == 0 {
        return invalid("--seeds must be at least 1");
    }
    let values: Vec<&str> = args
        .values
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if values.is_empty() {
        return invalid("--values must list at least one value");
    }
    let base = match Experiment::from_common(&args.common) {
        Ok(e) => e,
        Err(e) => return invalid(e),
    };
    let mut rows = String::from("axis,value,mean_overhead,completion_rate\n");
    for raw in &values {
        let mut exp = base.clone();
        match args.axis.as_str() {
            "gamma" => match raw.parse::<f64>() {
                Ok(v) if (0.0..=1.0).contains(&v) => exp.cfg.selection.gamma = v,
                _ => return invalid(format!("invalid gamma value '{raw}'")),
            },
            "window" => match raw.parse::<f64>() {
                Ok(v) if v > 0.0 => exp.cfg.selection.window_length = v,
                _ => return invalid(format!("invalid window value '{raw}'")),
            },
            "agents" => match raw.parse::<usize>() {
                Ok(v) if v > 0 => exp.agents = Some(v),
                _ => return invalid(format!("invalid agent count '{raw}'")),
            },
            "failure_prob" => match raw.parse::<f64>() {
                Ok(v) if (0.0..=1.0).contains(&v) => exp.cfg.actuator_failure_prob = v,
                _ => return invalid(format!("invalid failure probability '{raw}'")),
            },
            other => {
                return invalid(format!(
                    "unknown axis '{other}' (gamma | window | agents | failure_prob)"
                ))
            }
        }
        let outcomes = match run_batch(&exp, args.seeds) {
            Ok(o) => o,
            Err(e) => return invalid(e),
        };
        let agg = aggregate(&exp, args.seeds, &outcomes);
        let _ = writeln!(
            rows,
            "{},{},{:.6},{:.6}",
            args.axis, raw, agg.mean_penalized_overhead, agg.completion_rate
        );
        println!(
            "{}={}: penalized overhead {:.3}, completion {:.0}%",
            args.axis,
            raw,
            agg.mean_penalized_overhead,
            agg.completion_rate * 100.0
        );
    }
    if let Err(e) = base.ensure_out_dir() {
        return runtime(e);
    }
    if let Err(e) = base.write("sweep.csv", &rows) {
        return runtime(e);
    }
    ExitCode::SUCCESS
}

fn cmd_optimize(args: &OptimizeArgs) -> ExitCode {
    if args.iterations == 0 {
        return invalid("--iterations must be at least 1");
    }
    let exp = match Experiment::from_common(&CommonArgs {
        scenario: args
            .common
            .scenario
            .clone()
            .or_else(|| Some("incoming".into())),
        ..args.common.clone()
    }) {
        Ok(e) => e,
        Err(e) => return invalid(e),
    };
    let mut train = args.train.clone();
    if train.is_empty() {
        train.push(exp.scenario_name.clone());
    }
    let mut scenarios = Vec::new();
    for name in &train {
        let n = match exp.agents.or_else(|| default_agent_count(name)) {
            Some(n) => n,
            None => return invalid(unknown_scenario(name)),
        };
        match builtin_scenario(name, n, 0) {
            Ok(s) => scenarios.push(s),
            Err(e) => return invalid(e),
        }
    }
    let objective = SimObjective {
        scenarios,
        cfg: exp.cfg,
        base_seed: args.seed,
    };
    let schedule = AnnealSchedule {
        n_iterations: args.iterations,
        evals_start: args.evals_start,
        evals_end: args.evals_end,
        ..AnnealSchedule::default()
    };
    let outcome = optimize(
        &mut |set, reps| objective.evaluate(set, reps),
        &schedule,
        args.seed,
    );
    if let Err(e) = exp.ensure_out_dir() {
        return runtime(e);
    }
    if let Err(e) = exp.write("actions.json", &outcome.best_set.save()) {
        return runtime(e);
    }
    let mut chain = String::from("iteration,F,accepted,set_size,temperature\n");
    for row in &outcome.chain {
        let _ = writeln!(
            chain,
            "{},{:.6},{},{},{:.6}",
            row.iteration, row.f, row.accepted, row.set_size, row.temperature
        );
    }
    if let Err(e) = exp.write("chain.csv", &chain) {
        return runtime(e);
    }
    println!(
        "initial F {:.3} -> best F {:.3} ({} actions)",
        outcome.chain.first().map(|r| r.f).unwrap_or(f64::NAN),
        outcome.best_f,
        outcome.best_set.len()
    );
    ExitCode::SUCCESS
}

fn cmd_scenarios() -> ExitCode {
    println!("name           default agents");
    for (name, n) in BUILTIN_SCENARIOS {
        println!("{name:<14} {n}");
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(&args),
        Command::Batch(args) => cmd_batch(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Optimize(args) => cmd_optimize(&args),
        Command::Scenarios => cmd_scenarios(),
    }
}
