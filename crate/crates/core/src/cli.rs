//! Command-line front end: scenario generation, one-shot planning,
//! simulation, the exhaustive oracle and ledger inspection.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::aco::{AcoDiagnostics, Colony, IterationRecord, PlacementPlan};
use crate::cost;
use crate::error::{Error, Result};
use crate::filter::{filter_candidates, CandidateMap};
use crate::fixtures;
use crate::graph::{BandwidthAggregation, TaskId, TaskSpec};
use crate::ledger::{check_log, Account, Ledger, LedgerOp, TokenId};
use crate::sim::{self, GeneratorSpec, Scenario, SimReport};

#[derive(Debug, Parser)]
#[command(name = "edgeorch", version, about = "Task placement and orchestration for edge-fog-cloud graphs")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
    /// Overrides the scenario's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Human-readable tables instead of JSON.
    #[arg(long, global = true)]
    pub pretty: bool,
    /// Worker threads for ant construction.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long = "bw-agg", global = true, value_name = "MODE")]
    pub bw_agg: Option<BandwidthAggregation>,
    /// Min-max normalize cost components per task.
    #[arg(long, global = true)]
    pub normalize: bool,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Writes a synthetic or preset scenario.
    Generate {
        #[arg(long, default_value_t = 4)]
        devices: usize,
        #[arg(long, default_value_t = 3)]
        edge: usize,
        #[arg(long, default_value_t = 1)]
        fog: usize,
        #[arg(long, default_value_t = 1)]
        cloud: usize,
        #[arg(long, default_value_t = 5)]
        tasks: usize,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
    },
    /// Filters and optimizes the scenario's unassigned tasks once.
    Plan {
        scenario: PathBuf,
        /// Also run the exhaustive search and report the gap.
        #[arg(long)]
        oracle: bool,
    },
    /// Runs the event loop.
    Simulate {
        scenario: PathBuf,
        /// Per-tick utilization CSV.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Exhaustive optimum for a small scenario.
    Oracle { scenario: PathBuf },
    /// Replays and checks the ledger log of a simulation report.
    Ledger { report: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// The four-node testbed with one forecasting task to place.
    Testbed,
    /// The deployed testbed with a CPU pressure spike on edge-3.
    Migration,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSection {
    pub plan: PlacementPlan,
    /// Relative mean-cost gap of the heuristic plan; absent when the assigned
    /// counts differ or nothing is assigned.
    pub gap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub effective_seed: u64,
    pub compute_nodes: usize,
    pub candidate_sizes: BTreeMap<TaskId, usize>,
    pub mean_candidates: f64,
    pub candidates: CandidateMap,
    pub plan: PlacementPlan,
    pub assignment_ratio: f64,
    pub trace: Vec<IterationRecord>,
    pub diagnostics: AcoDiagnostics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
    pub invariant_violations: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub search_space: f64,
    pub plan: PlacementPlan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenSummary {
    pub token: TokenId,
    pub task: TaskId,
    pub owner: Account,
    pub history: Vec<Account>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub events: usize,
    pub mints: usize,
    pub transfers: usize,
    pub burns: usize,
    pub gas_total: u64,
    pub live_tokens: Vec<TokenSummary>,
    pub invariant_violations: Vec<String>,
}

fn pending_tasks(scenario: &Scenario) -> Vec<TaskSpec> {
    let assigned: std::collections::BTreeSet<&TaskId> = scenario.assignments.iter().map(|a| &a.task_id).collect();
    scenario
        .tasks
        .iter()
        .filter(|t| !assigned.contains(&t.id))
        .cloned()
        .collect()
}

/// Filter plus one optimization run over the scenario's unassigned tasks.
pub fn plan_report(scenario: &Scenario, with_oracle: bool) -> Result<PlanReport> {
    scenario.aco.validate()?;
    let graph = scenario.graph()?;
    let tasks = pending_tasks(scenario);
    let candidates = filter_candidates(&graph, &tasks)?;
    let colony = Colony::new(&graph, &tasks, &candidates, &scenario.weights)?;
    let outcome = colony.optimize(&scenario.aco)?;
    let plan = outcome.plan;

    let mut violations = Vec::new();
    if let Err(e) = plan.check_feasible(&graph, &tasks) {
        violations.push(format!("resource conservation: {e}"));
    }
    if cost::plan_cost(&plan, &scenario.weights) != plan.mean_cost {
        violations.push("mean_cost differs from plan_cost recomputation".into());
    }
    let d = &outcome.diagnostics;
    if !d.bounds_respected {
        violations.push("pheromone bounds".into());
    }
    if !d.incumbent_monotone {
        violations.push("best-so-far monotonicity".into());
    }
    if d.max_normalization_error > 1e-12 {
        violations.push(format!("probability normalization error {}", d.max_normalization_error));
    }

    let oracle = if with_oracle {
        let best = colony.brute_force()?;
        if plan.rank().better_than(&best.rank()) {
            violations.push("heuristic plan beats the exhaustive optimum".into());
        }
        let gap = match (plan.mean_cost, best.mean_cost) {
            (Some(a), Some(b)) if plan.assigned_count == best.assigned_count && b > 0.0 => Some((a - b) / b),
            (Some(a), Some(b)) if plan.assigned_count == best.assigned_count => Some(a - b),
            _ => None,
        };
        Some(OracleSection { plan: best, gap })
    } else {
        None
    };

    Ok(PlanReport {
        effective_seed: scenario.aco.seed,
        compute_nodes: graph.compute_nodes().count(),
        candidate_sizes: candidates.sizes(),
        mean_candidates: candidates.mean_size(),
        assignment_ratio: plan.assignment_ratio(),
        candidates,
        plan,
        trace: outcome.trace,
        diagnostics: outcome.diagnostics,
        oracle,
        invariant_violations: violations,
    })
}

pub fn oracle_report(scenario: &Scenario) -> Result<OracleReport> {
    let graph = scenario.graph()?;
    let tasks = pending_tasks(scenario);
    let candidates = filter_candidates(&graph, &tasks)?;
    let colony = Colony::new(&graph, &tasks, &candidates, &scenario.weights)?;
    Ok(OracleReport {
        search_space: colony.search_space(),
        plan: colony.brute_force()?,
    })
}

pub fn ledger_summary(report: &SimReport) -> LedgerSummary {
    let mut violations = check_log(&report.ledger_events, Some(report.gas_total));
    let mut live_tokens = Vec::new();
    match Ledger::replay(&report.ledger_events) {
        Ok(l) => {
            if l.gas_total() != report.gas_total {
                violations.push(format!(
                    "replayed gas {} differs from reported {}",
                    l.gas_total(),
                    report.gas_total
                ));
            }
            for (token, rec) in l.live_tokens() {
                live_tokens.push(TokenSummary {
                    token: *token,
                    task: rec.task.clone(),
                    owner: rec.owner.clone(),
                    history: rec.history.clone(),
                });
            }
        }
        Err(e) => violations.push(format!("replay: {e}")),
    }
    let count = |f: fn(&LedgerOp) -> bool| report.ledger_events.iter().filter(|e| f(&e.op)).count();
    LedgerSummary {
        events: report.ledger_events.len(),
        mints: count(|o| matches!(o, LedgerOp::Mint { .. })),
        transfers: count(|o| matches!(o, LedgerOp::Transfer { .. })),
        burns: count(|o| matches!(o, LedgerOp::Burn { .. })),
        gas_total: report.gas_total,
        live_tokens,
        invariant_violations: violations,
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn load_scenario(cfg: &RunConfig, path: &Path) -> Result<Scenario> {
    let text = read(path)?;
    let mut s: Scenario = serde_json::from_str(&text)
        .map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
    apply_overrides(cfg, &mut s);
    Ok(s)
}

/// Folds command-line overrides into a scenario.
pub fn apply_overrides(cfg: &RunConfig, s: &mut Scenario) {
    if let Some(seed) = cfg.seed {
        s.aco.seed = seed;
    }
    if let Some(t) = cfg.threads {
        s.aco.threads = t.max(1);
    }
    if cfg.normalize {
        s.weights = s.weights.with_normalization(true);
    }
    if let Some(mode) = cfg.bw_agg {
        s.sim.bw_aggregation = mode;
    }
}

fn emit(cfg: &RunConfig, body: &str) -> Result<()> {
    match &cfg.output {
        Some(p) => std::fs::write(p, body)?,
        None => print!("{body}"),
    }
    Ok(())
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn fmt_cost(c: Option<f64>) -> String {
    c.map_or_else(|| "-".into(), |v| format!("{v:.6}"))
}

fn pretty_plan(r: &PlanReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "seed {}  compute nodes {}  mean candidates {:.2}", r.effective_seed, r.compute_nodes, r.mean_candidates);
    let _ = writeln!(out, "{:<28} {:<14} {:>12} {:>12} {:>12} {:>12}", "task", "node", "exec", "comm", "energy", "total");
    for (t, p) in &r.plan.assignments {
        let c = &p.cost;
        let _ = writeln!(
            out,
            "{:<28} {:<14} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
            t.as_str(),
            p.node_id.as_str(),
            c.exec,
            c.comm,
            c.energy,
            c.total
        );
    }
    for t in &r.plan.unassigned {
        let _ = writeln!(out, "{:<28} {:<14}", t.as_str(), "(unassigned)");
    }
    let _ = writeln!(out, "assigned {}  mean cost {}", r.plan.assigned_count, fmt_cost(r.plan.mean_cost));
    if let Some(o) = &r.oracle {
        let _ = writeln!(
            out,
            "oracle: assigned {}  mean cost {}  gap {}",
            o.plan.assigned_count,
            fmt_cost(o.plan.mean_cost),
            o.gap.map_or_else(|| "-".into(), |g| format!("{:.4}%", g * 100.0))
        );
    }
    out
}

fn pretty_sim(r: &SimReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "seed {}  events {}  gas {}", r.effective_seed, r.event_log.len(), r.gas_total);
    let _ = writeln!(out, "{:<28} {:<12} {:<12} {:>8} {:>10} {:>8}", "task", "from", "to", "at", "pull (s)", "down");
    for m in &r.migrations {
        let _ = writeln!(
            out,
            "{:<28} {:<12} {:<12} {:>8} {:>10.3} {:>8}",
            m.task_id.as_str(),
            m.from_node.as_str(),
            m.to_node.as_str(),
            m.started_at,
            m.image_pull_duration,
            m.downtime
        );
    }
    let _ = writeln!(out, "final placement:");
    for (t, n) in &r.final_plan.assignments {
        let _ = writeln!(out, "  {:<28} {}", t.as_str(), n.as_str());
    }
    for t in &r.final_plan.unassigned {
        let _ = writeln!(out, "  {:<28} (unassigned)", t.as_str());
    }
    out
}

fn pretty_ledger(s: &LedgerSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "events {}  mints {}  transfers {}  burns {}  gas {}",
        s.events, s.mints, s.transfers, s.burns, s.gas_total
    );
    for t in &s.live_tokens {
        let hist: Vec<&str> = t.history.iter().map(Account::as_str).collect();
        let _ = writeln!(out, "{}  {}  {}", t.token, t.task.as_str(), hist.join(" -> "));
    }
    out
}

fn report_violations(violations: &[String]) -> i32 {
    for v in violations {
        eprintln!("invariant violated: {v}");
    }
    i32::from(!violations.is_empty())
}

/// Executes one command and returns the process exit code.
pub fn run(cfg: &RunConfig) -> Result<i32> {
    match &cfg.command {
        Command::Generate {
            devices,
            edge,
            fog,
            cloud,
            tasks,
            preset,
        } => {
            let seed = cfg.seed.unwrap_or(0);
            let mut s = match preset {
                Some(Preset::Testbed) => fixtures::testbed_scenario(),
                Some(Preset::Migration) => fixtures::migration_scenario(),
                None => sim::generate_synthetic(
                    &GeneratorSpec {
                        devices: *devices,
                        edge: *edge,
                        fog: *fog,
                        cloud: *cloud,
                        tasks: *tasks,
                    },
                    seed,
                )?,
            };
            apply_overrides(cfg, &mut s);
            eprintln!("effective seed: {}", s.aco.seed);
            emit(cfg, &json(&s)?)?;
            let compute = s.nodes.iter().filter(|n| n.is_compute()).count();
            let summary = format!(
                "{} nodes ({} compute, {} devices), {} links, {} tasks",
                s.nodes.len(),
                compute,
                s.nodes.len() - compute,
                s.links.len(),
                s.tasks.len()
            );
            if cfg.output.is_some() {
                println!("{summary}");
            } else {
                eprintln!("{summary}");
            }
            Ok(0)
        }
        Command::Plan { scenario, oracle } => {
            let s = load_scenario(cfg, scenario)?;
            eprintln!("effective seed: {}", s.aco.seed);
            let r = plan_report(&s, *oracle)?;
            emit(cfg, &if cfg.pretty { pretty_plan(&r) } else { json(&r)? })?;
            Ok(report_violations(&r.invariant_violations))
        }
        Command::Simulate { scenario, metrics } => {
            let s = load_scenario(cfg, scenario)?;
            eprintln!("effective seed: {}", s.aco.seed);
            let r = sim::run(&s)?;
            emit(cfg, &if cfg.pretty { pretty_sim(&r) } else { json(&r)? })?;
            if let Some(path) = metrics {
                std::fs::write(path, r.metrics_csv())?;
            }
            if cfg.verbose > 0 {
                eprintln!("{} migrations, gas {}", r.migrations.len(), r.gas_total);
            }
            Ok(report_violations(&r.invariant_violations))
        }
        Command::Oracle { scenario } => {
            let s = load_scenario(cfg, scenario)?;
            eprintln!("effective seed: {}", s.aco.seed);
            let r = oracle_report(&s)?;
            emit(cfg, &json(&r)?)?;
            Ok(0)
        }
        Command::Ledger { report } => {
            let text = read(report)?;
            let r: SimReport = serde_json::from_str(&text)
                .map_err(|e| Error::Scenario(format!("{}: {e}", report.display())))?;
            let summary = ledger_summary(&r);
            emit(cfg, &if cfg.pretty { pretty_ledger(&summary) } else { json(&summary)? })?;
            Ok(report_violations(&summary.invariant_violations))
        }
    }
}

/// Parses arguments, runs, and maps errors to exit code 2.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cfg) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
