//! Discrete-event orchestration loop.
//!
//! A scenario is a graph snapshot plus a list of timed events. The loop
//! advances in fixed monitoring ticks, applies due events, raises an alert
//! when a node's measured CPU load crosses the pressure threshold, re-plans
//! the tasks hosted there with the node excluded, and migrates them with a
//! make-before-break policy. Every placement change is mirrored in the
//! ledger: first placements mint a token, moves transfer it, stops burn it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aco::{self, AcoParams, PlacementPlan};
use crate::cost::CostWeights;
use crate::error::{Error, Result};
use crate::filter::filter_candidates;
use crate::graph::{
    AssignmentEdge, BandwidthAggregation, InfraGraph, Layer, LinkRecord, NodeId, NodeRecord, Snapshot, TaskId,
    TaskSpec, GIB, MIB,
};
use crate::ledger::{Account, Ledger, LedgerEvent};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimEvent {
    pub at: f64,
    pub kind: EventKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventKind {
    TaskArrival { task: TaskSpec },
    CpuPressure { node: NodeId, load_fraction: f64 },
    NodeFailure { node: NodeId },
    LinkChange { link: LinkRecord },
    TaskStop { task: TaskId },
}

impl EventKind {
    /// Processing order among events due at the same time.
    pub fn priority(&self) -> u8 {
        match self {
            EventKind::LinkChange { .. } => 0,
            EventKind::NodeFailure { .. } => 1,
            EventKind::CpuPressure { .. } => 2,
            EventKind::TaskStop { .. } => 3,
            EventKind::TaskArrival { .. } => 4,
        }
    }

    pub fn subject(&self) -> String {
        match self {
            EventKind::TaskArrival { task } => task.id.to_string(),
            EventKind::CpuPressure { node, .. } | EventKind::NodeFailure { node } => node.to_string(),
            EventKind::LinkChange { link } => link.id().to_string(),
            EventKind::TaskStop { task } => task.to_string(),
        }
    }
}

fn default_threshold() -> f64 {
    0.9
}

fn default_tick() -> f64 {
    1.0
}

fn default_overhead() -> f64 {
    0.010
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Fraction of cpu_total above which a node raises an alert.
    #[serde(default = "default_threshold")]
    pub pressure_threshold: f64,
    /// Monitoring period in seconds.
    #[serde(default = "default_tick")]
    pub tick: f64,
    /// Last monitored time. Defaults to the later of the last event and the
    /// end of the last image pull.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Image registry node; defaults to the first cloud node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registry: Option<NodeId>,
    #[serde(default)]
    pub bw_aggregation: BandwidthAggregation,
    /// Extra latency logged on the pull path while an image is pulled.
    #[serde(default = "default_overhead")]
    pub migration_latency_overhead: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            pressure_threshold: default_threshold(),
            tick: default_tick(),
            horizon: None,
            registry: None,
            bw_aggregation: BandwidthAggregation::Mean,
            migration_latency_overhead: default_overhead(),
        }
    }
}

fn default_minter() -> String {
    "orchestrator".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerConfig {
    /// Fungible units charged per second of running time.
    #[serde(default)]
    pub rate: f64,
    /// Units credited to each task's sponsor account when its token is minted.
    #[serde(default)]
    pub sponsor_funding: u64,
    #[serde(default = "default_minter")]
    pub minter: String,
}

impl Default for LedgerConfig {
    fn default() -> Self {
        Self {
            rate: 0.0,
            sponsor_funding: 0,
            minter: default_minter(),
        }
    }
}

/// Counts for the layered synthetic topology.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub devices: usize,
    pub edge: usize,
    pub fog: usize,
    pub cloud: usize,
    pub tasks: usize,
}

impl GeneratorSpec {
    pub fn compute_nodes(&self) -> usize {
        self.edge + self.fog + self.cloud
    }

    pub fn total_nodes(&self) -> usize {
        self.devices + self.compute_nodes()
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_nodes() == 0 {
            return Err(Error::Generator("the topology needs at least one node".into()));
        }
        if self.tasks > 0 && self.compute_nodes() == 0 {
            return Err(Error::Generator("tasks need at least one edge, fog or cloud node".into()));
        }
        if self.tasks > 0 && self.devices == 0 {
            return Err(Error::Generator("tasks need at least one device as data source".into()));
        }
        Ok(())
    }
}

/// Graph snapshot plus events and run configuration.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub nodes: Vec<NodeRecord>,
    #[serde(default)]
    pub links: Vec<LinkRecord>,
    #[serde(default)]
    pub tasks: Vec<TaskSpec>,
    #[serde(default)]
    pub assignments: Vec<AssignmentEdge>,
    #[serde(default)]
    pub events: Vec<SimEvent>,
    #[serde(default)]
    pub aco: AcoParams,
    #[serde(default)]
    pub weights: CostWeights,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub ledger: LedgerConfig,
}

impl Scenario {
    pub fn from_graph(graph: &InfraGraph) -> Self {
        let s = graph.snapshot();
        Self {
            nodes: s.nodes,
            links: s.links,
            tasks: s.tasks,
            assignments: s.assignments,
            sim: SimConfig {
                bw_aggregation: graph.bw_aggregation(),
                ..Default::default()
            },
            ..Default::default()
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            nodes: self.nodes.clone(),
            links: self.links.clone(),
            tasks: self.tasks.clone(),
            assignments: self.assignments.clone(),
        }
    }

    pub fn graph(&self) -> Result<InfraGraph> {
        let mut g = InfraGraph::load(&self.snapshot())?;
        g.set_bw_aggregation(self.sim.bw_aggregation);
        Ok(g)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scenario(m));
        if !(self.sim.tick.is_finite() && self.sim.tick > 0.0) {
            return bad(format!("sim.tick must be positive, got {}", self.sim.tick));
        }
        if !(self.sim.pressure_threshold > 0.0 && self.sim.pressure_threshold.is_finite()) {
            return bad(format!("sim.pressure_threshold must be positive, got {}", self.sim.pressure_threshold));
        }
        if !(self.ledger.rate.is_finite() && self.ledger.rate >= 0.0) {
            return bad(format!("ledger.rate must be nonnegative, got {}", self.ledger.rate));
        }
        for (i, e) in self.events.iter().enumerate() {
            if !(e.at.is_finite() && e.at >= 0.0) {
                return bad(format!("events[{i}].at must be a nonnegative time, got {}", e.at));
            }
            if let EventKind::CpuPressure { load_fraction, .. } = &e.kind {
                if !(load_fraction.is_finite() && *load_fraction >= 0.0) {
                    return bad(format!("events[{i}].load_fraction must be nonnegative"));
                }
            }
        }
        self.aco.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MigrationCause {
    CpuPressure,
    NodeFailure,
    /// A task orphaned by a failure is placed again in a later round.
    Arrival,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MigrationRecord {
    pub task_id: TaskId,
    pub from_node: NodeId,
    pub to_node: NodeId,
    pub started_at: f64,
    /// Seconds to pull the executable image from the registry.
    pub image_pull_duration: f64,
    /// Bytes/s on the pull path; 0 when nothing is pulled.
    pub bandwidth_peak: f64,
    pub downtime: f64,
    pub cause: MigrationCause,
    /// Event-log entry that triggered the move.
    pub trigger_seq: u64,
}

/// What `apply_plan` needs beyond the plan itself.
#[derive(Clone, Debug)]
pub struct ApplyOptions {
    pub registry: Option<NodeId>,
    pub rate: f64,
    pub sponsor_funding: u64,
    pub minter: Account,
    pub cause: MigrationCause,
    pub trigger_seq: u64,
}

/// First cloud node by id, if any.
pub fn default_registry(graph: &InfraGraph) -> Option<NodeId> {
    graph
        .compute_nodes()
        .find(|n| n.layer == Layer::Cloud)
        .map(|n| n.id.clone())
}

/// (duration, bandwidth) of pulling `bytes` from the registry to `target`.
fn pull_stats(graph: &InfraGraph, registry: Option<&NodeId>, target: &NodeId, bytes: u64) -> Result<(f64, f64)> {
    let Some(reg) = registry else {
        return Ok((0.0, 0.0));
    };
    if reg == target || bytes == 0 {
        return Ok((0.0, 0.0));
    }
    match graph.best_path(reg, target)? {
        Some(p) => Ok((bytes as f64 / p.avg_bandwidth, p.avg_bandwidth)),
        None => Err(Error::PlanRejected(format!("registry `{reg}` cannot reach `{target}`"))),
    }
}

fn reject(e: Error) -> Error {
    match e {
        Error::PlanRejected(_) => e,
        other => Error::PlanRejected(other.to_string()),
    }
}

/// Settles the token's running time and moves it to `to`.
fn move_token(ledger: &mut Ledger, task: &TaskId, to: &NodeId, now: f64, rate: f64) -> Result<()> {
    let token = ledger.token_of(task.as_str()).expect("caller checked");
    let rec = ledger.token(&token).expect("token exists").clone();
    ledger.accrue_and_settle(&token, now - rec.minted_at, rate, now)?;
    let from = rec.owner.as_str().strip_prefix("node:").unwrap_or(rec.owner.as_str());
    ledger.transfer(&token, &NodeId::from(from), to, now)?;
    Ok(())
}

/// Applies every assignment in `plan` to the graph and ledger. Either all of
/// them take effect or none do.
///
/// A task still running elsewhere is relocated with the new instance
/// reserved before the old one is released, so its downtime is zero. A task
/// whose previous host is gone is restarted, and its downtime is the image
/// pull time.
pub fn apply_plan(
    graph: &mut InfraGraph,
    plan: &PlacementPlan,
    ledger: &mut Ledger,
    now: f64,
    opts: &ApplyOptions,
) -> Result<Vec<MigrationRecord>> {
    let mut g = graph.clone();
    let mut l = ledger.clone();
    let registry = opts.registry.clone().or_else(|| default_registry(graph));
    let mut records = Vec::new();
    for (task_id, placement) in &plan.assignments {
        let to = &placement.node_id;
        let spec = g
            .task(task_id.as_str())
            .cloned()
            .ok_or_else(|| Error::UnknownTask(task_id.clone()))?;
        let current = g.assignment(task_id.as_str()).map(|a| a.node_id.clone());
        if current.as_ref() == Some(to) {
            continue;
        }
        let live_token = l.token_of(task_id.as_str()).filter(|t| !l.is_burned(t));
        let (pull, peak) = pull_stats(&g, registry.as_ref(), to, spec.exe_size).map_err(reject)?;
        match (current, live_token) {
            (Some(from), token) => {
                g.relocate(task_id, to, now).map_err(reject)?;
                if token.is_some() {
                    move_token(&mut l, task_id, to, now, opts.rate).map_err(reject)?;
                } else {
                    l.fund(Account::sponsor(task_id), opts.sponsor_funding, now);
                    l.mint(&spec, &opts.minter, to, Account::sponsor(task_id), now)
                        .map_err(|e| reject(e.into()))?;
                }
                records.push(MigrationRecord {
                    task_id: task_id.clone(),
                    from_node: from,
                    to_node: to.clone(),
                    started_at: now,
                    image_pull_duration: pull,
                    bandwidth_peak: peak,
                    downtime: 0.0,
                    cause: opts.cause,
                    trigger_seq: opts.trigger_seq,
                });
            }
            (None, Some(token)) => {
                g.assign(task_id, to, now).map_err(reject)?;
                let owner = l.owner(&token).expect("live").clone();
                move_token(&mut l, task_id, to, now, opts.rate).map_err(reject)?;
                let from = owner.as_str().strip_prefix("node:").unwrap_or(owner.as_str());
                records.push(MigrationRecord {
                    task_id: task_id.clone(),
                    from_node: NodeId::from(from),
                    to_node: to.clone(),
                    started_at: now,
                    image_pull_duration: pull,
                    bandwidth_peak: peak,
                    downtime: pull,
                    cause: opts.cause,
                    trigger_seq: opts.trigger_seq,
                });
            }
            (None, None) => {
                g.assign(task_id, to, now).map_err(reject)?;
                l.fund(Account::sponsor(task_id), opts.sponsor_funding, now);
                l.mint(&spec, &opts.minter, to, Account::sponsor(task_id), now)
                    .map_err(|e| reject(e.into()))?;
            }
        }
    }
    *graph = g;
    *ledger = l;
    Ok(records)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanView {
    pub assignments: BTreeMap<TaskId, NodeId>,
    pub unassigned: BTreeSet<TaskId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogKind {
    Event {
        event: EventKind,
    },
    Alert {
        node: NodeId,
        load: f64,
    },
    Planned {
        tasks: Vec<TaskId>,
        excluded: Vec<NodeId>,
        assigned: usize,
        mean_cost: Option<f64>,
        seed: u64,
    },
    Placed {
        task: TaskId,
        node: NodeId,
    },
    Migrated {
        task: TaskId,
        from: NodeId,
        to: NodeId,
    },
    LatencyOverhead {
        src: NodeId,
        dst: NodeId,
        extra: f64,
        until: f64,
    },
    Released {
        task: TaskId,
        node: NodeId,
    },
    Stopped {
        task: TaskId,
    },
    Rejected {
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub at: f64,
    pub entry: LogKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilizationRow {
    pub time: f64,
    pub node: NodeId,
    /// Milli-cores.
    pub cpu_used: u64,
    /// Bytes.
    pub ram_used: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub effective_seed: u64,
    pub initial_plan: PlanView,
    pub final_plan: PlanView,
    pub event_log: Vec<LogEntry>,
    pub migrations: Vec<MigrationRecord>,
    pub utilization: Vec<UtilizationRow>,
    pub ledger_events: Vec<LedgerEvent>,
    pub gas_total: u64,
    pub invariant_violations: Vec<String>,
}

impl SimReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// `time,node,cpu_used,ram_used`, one row per (tick, node).
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("time,node,cpu_used,ram_used\n");
        for r in &self.utilization {
            let _ = writeln!(out, "{},{},{},{}", r.time, r.node, r.cpu_used, r.ram_used);
        }
        out
    }
}

/// Seed of the `round`-th planning round of a run.
pub fn round_seed(seed: u64, round: u64) -> u64 {
    seed ^ round.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

struct Sim<'a> {
    sc: &'a Scenario,
    graph: InfraGraph,
    ledger: Ledger,
    minter: Account,
    failed: BTreeSet<NodeId>,
    stopped: BTreeSet<TaskId>,
    pressure: BTreeMap<NodeId, f64>,
    alerted: BTreeSet<NodeId>,
    log: Vec<LogEntry>,
    migrations: Vec<MigrationRecord>,
    utilization: Vec<UtilizationRow>,
    rounds: u64,
    busy_until: f64,
}

impl Sim<'_> {
    fn record(&mut self, at: f64, entry: LogKind) -> u64 {
        let seq = self.log.len() as u64;
        self.log.push(LogEntry { seq, at, entry });
        seq
    }

    fn view(&self) -> PlanView {
        let mut v = PlanView::default();
        for t in self.graph.tasks().filter(|t| !self.stopped.contains(&t.id)) {
            match self.graph.assignment(t.id.as_str()) {
                Some(a) => {
                    v.assignments.insert(t.id.clone(), a.node_id.clone());
                }
                None => {
                    v.unassigned.insert(t.id.clone());
                }
            }
        }
        v
    }

    fn pending(&self) -> Vec<TaskSpec> {
        self.graph
            .tasks()
            .filter(|t| !self.stopped.contains(&t.id) && !self.graph.is_assigned(t.id.as_str()))
            .cloned()
            .collect()
    }

    /// Filters and optimizes `tasks` on a scratch copy of the graph with
    /// their current placements released, then applies the result.
    fn plan_round(
        &mut self,
        tasks: Vec<TaskSpec>,
        exclude: &BTreeSet<NodeId>,
        now: f64,
        cause: MigrationCause,
        trigger_seq: u64,
    ) -> Result<Vec<MigrationRecord>> {
        if tasks.is_empty() {
            return Ok(Vec::new());
        }
        let mut work = self.graph.clone();
        for t in &tasks {
            if work.is_assigned(t.id.as_str()) {
                work.release_assignment(&t.id)?;
            }
        }
        let mut cands = filter_candidates(&work, &tasks)?;
        let excluded: BTreeSet<NodeId> = exclude.union(&self.failed).cloned().collect();
        cands.exclude_nodes(&excluded);
        let seed = round_seed(self.sc.aco.seed, self.rounds);
        self.rounds += 1;
        let params = AcoParams {
            seed,
            ..self.sc.aco.clone()
        };
        let outcome = aco::optimize(&work, &tasks, &cands, &self.sc.weights, &params)?;
        self.record(
            now,
            LogKind::Planned {
                tasks: tasks.iter().map(|t| t.id.clone()).collect(),
                excluded: excluded.iter().cloned().collect(),
                assigned: outcome.plan.assigned_count,
                mean_cost: outcome.plan.mean_cost,
                seed,
            },
        );
        let before: BTreeMap<TaskId, Option<NodeId>> = tasks
            .iter()
            .map(|t| (t.id.clone(), self.graph.assignment(t.id.as_str()).map(|a| a.node_id.clone())))
            .collect();
        let opts = ApplyOptions {
            registry: self.sc.sim.registry.clone(),
            rate: self.sc.ledger.rate,
            sponsor_funding: self.sc.ledger.sponsor_funding,
            minter: self.minter.clone(),
            cause,
            trigger_seq,
        };
        match apply_plan(&mut self.graph, &outcome.plan, &mut self.ledger, now, &opts) {
            Ok(records) => {
                for (task, p) in &outcome.plan.assignments {
                    if before[task].is_none() && !records.iter().any(|r| &r.task_id == task) {
                        self.record(
                            now,
                            LogKind::Placed {
                                task: task.clone(),
                                node: p.node_id.clone(),
                            },
                        );
                    }
                }
                let registry = self.sc.sim.registry.clone().or_else(|| default_registry(&self.graph));
                for r in &records {
                    self.record(
                        now,
                        LogKind::Migrated {
                            task: r.task_id.clone(),
                            from: r.from_node.clone(),
                            to: r.to_node.clone(),
                        },
                    );
                    if r.image_pull_duration > 0.0 {
                        let until = now + r.image_pull_duration;
                        self.busy_until = self.busy_until.max(until);
                        if let Some(src) = &registry {
                            self.record(
                                now,
                                LogKind::LatencyOverhead {
                                    src: src.clone(),
                                    dst: r.to_node.clone(),
                                    extra: self.sc.sim.migration_latency_overhead,
                                    until,
                                },
                            );
                        }
                    }
                }
                self.migrations.extend(records.iter().cloned());
                Ok(records)
            }
            Err(e @ Error::PlanRejected(_)) => {
                self.record(now, LogKind::Rejected { reason: e.to_string() });
                Ok(Vec::new())
            }
            Err(e) => Err(e),
        }
    }

    fn require_node(&self, id: &NodeId) -> Result<()> {
        match self.graph.node(id.as_str()) {
            Some(_) => Ok(()),
            None => Err(Error::Scenario(format!("event refers to unknown node `{id}`"))),
        }
    }

    fn handle(&mut self, ev: &SimEvent, now: f64) -> Result<()> {
        let seq = self.record(ev.at, LogKind::Event { event: ev.kind.clone() });
        match &ev.kind {
            EventKind::TaskArrival { task } => {
                if self.graph.task(task.id.as_str()).is_some() {
                    return Err(Error::Scenario(format!("task `{}` arrives twice", task.id)));
                }
                self.graph.upsert_task(task.clone())?;
                let pending = self.pending();
                self.plan_round(pending, &BTreeSet::new(), now, MigrationCause::Arrival, seq)?;
            }
            EventKind::CpuPressure { node, load_fraction } => {
                self.require_node(node)?;
                self.pressure.insert(node.clone(), *load_fraction);
            }
            EventKind::NodeFailure { node } => {
                self.require_node(node)?;
                self.failed.insert(node.clone());
                self.pressure.remove(node);
                self.graph.remove_links_of(node);
                let hosted = self.graph.hosted_tasks(node);
                let mut specs = Vec::new();
                for t in &hosted {
                    self.graph.release_assignment(t)?;
                    specs.push(self.graph.task(t.as_str()).expect("hosted task exists").clone());
                }
                let exclude = BTreeSet::from([node.clone()]);
                let moved = self.plan_round(specs, &exclude, now, MigrationCause::NodeFailure, seq)?;
                for t in hosted {
                    if !moved.iter().any(|r| r.task_id == t) {
                        self.record(now, LogKind::Released { task: t, node: node.clone() });
                    }
                }
            }
            EventKind::LinkChange { link } => {
                self.graph.upsert_link(link.clone())?;
            }
            EventKind::TaskStop { task } => {
                if self.graph.task(task.as_str()).is_none() {
                    return Err(Error::Scenario(format!("event stops unknown task `{task}`")));
                }
                if self.graph.is_assigned(task.as_str()) {
                    self.graph.release_assignment(task)?;
                }
                self.stopped.insert(task.clone());
                if let Some(token) = self.ledger.token_of(task.as_str()).filter(|t| !self.ledger.is_burned(t)) {
                    let rec = self.ledger.token(&token).expect("live").clone();
                    let mut scratch = self.ledger.clone();
                    let owner = rec.owner.as_str().strip_prefix("node:").unwrap_or(rec.owner.as_str());
                    let burned = scratch
                        .accrue_and_settle(&token, now - rec.minted_at, self.sc.ledger.rate, now)
                        .and_then(|_| scratch.burn(&token, &NodeId::from(owner), now));
                    match burned {
                        Ok(()) => self.ledger = scratch,
                        Err(e) => {
                            self.record(now, LogKind::Rejected { reason: e.to_string() });
                        }
                    }
                }
                self.record(now, LogKind::Stopped { task: task.clone() });
            }
        }
        Ok(())
    }

    fn load_of(&self, node: &NodeRecord) -> f64 {
        self.pressure.get(&node.id).copied().unwrap_or(0.0)
    }

    fn monitor(&mut self, now: f64) -> Result<()> {
        let nodes: Vec<NodeRecord> = self
            .graph
            .compute_nodes()
            .filter(|n| !self.failed.contains(&n.id))
            .cloned()
            .collect();
        for node in nodes {
            let load = self.load_of(&node);
            if load <= self.sc.sim.pressure_threshold {
                self.alerted.remove(&node.id);
                continue;
            }
            if !self.alerted.insert(node.id.clone()) {
                continue;
            }
            let seq = self.record(
                now,
                LogKind::Alert {
                    node: node.id.clone(),
                    load,
                },
            );
            let specs: Vec<TaskSpec> = self
                .graph
                .hosted_tasks(&node.id)
                .iter()
                .map(|t| self.graph.task(t.as_str()).expect("hosted").clone())
                .collect();
            let exclude = BTreeSet::from([node.id.clone()]);
            let moved = self.plan_round(specs, &exclude, now, MigrationCause::CpuPressure, seq)?;
            if !moved.is_empty() {
                // The offending workload left; the node's load returns to normal.
                self.pressure.remove(&node.id);
            }
        }
        Ok(())
    }

    fn sample(&mut self, now: f64) {
        for node in self.graph.compute_nodes() {
            let hosted = self.graph.hosted_footprint(&node.id);
            let pressured = (self.load_of(node) * node.cpu_total as f64).round() as u64;
            self.utilization.push(UtilizationRow {
                time: now,
                node: node.id.clone(),
                cpu_used: hosted.cpu.max(pressured),
                ram_used: hosted.ram,
            });
        }
    }

    fn invariant_violations(&self) -> Vec<String> {
        let mut out = self.graph.conservation_violations();
        out.extend(self.ledger.check_invariants());
        for m in &self.migrations {
            if m.cause == MigrationCause::CpuPressure && m.downtime != 0.0 {
                out.push(format!("migration of `{}` had downtime {}", m.task_id, m.downtime));
            }
            let trigger = self.log.get(m.trigger_seq as usize).map(|e| &e.entry);
            let ok = match trigger {
                Some(LogKind::Alert { node, .. }) => node == &m.from_node,
                Some(LogKind::Event {
                    event: EventKind::NodeFailure { node },
                }) => node == &m.from_node,
                Some(LogKind::Event {
                    event: EventKind::TaskArrival { .. },
                }) => m.cause == MigrationCause::Arrival,
                _ => false,
            };
            if !ok {
                out.push(format!(
                    "migration of `{}` off `{}` has no matching trigger",
                    m.task_id, m.from_node
                ));
            }
        }
        out
    }
}

/// Runs a scenario to completion.
pub fn run(scenario: &Scenario) -> Result<SimReport> {
    scenario.validate()?;
    let graph = scenario.graph()?;
    let mut ledger = Ledger::new();
    let minter = Account::origin(&scenario.ledger.minter);
    ledger.authorize_minter(minter.clone(), 0.0);
    for a in graph.assignments() {
        let spec = graph.task(a.task_id.as_str()).expect("loaded graph is consistent");
        ledger.fund(Account::sponsor(&a.task_id), scenario.ledger.sponsor_funding, 0.0);
        ledger.mint(spec, &minter, &a.node_id, Account::sponsor(&a.task_id), 0.0)?;
    }

    let mut events: Vec<(usize, &SimEvent)> = scenario.events.iter().enumerate().collect();
    events.sort_by(|(ia, a), (ib, b)| {
        a.at.total_cmp(&b.at)
            .then(a.kind.priority().cmp(&b.kind.priority()))
            .then_with(|| a.kind.subject().cmp(&b.kind.subject()))
            .then(ia.cmp(ib))
    });
    let arriving: BTreeSet<&TaskId> = events
        .iter()
        .filter_map(|(_, e)| match &e.kind {
            EventKind::TaskArrival { task } => Some(&task.id),
            _ => None,
        })
        .collect();
    for id in &arriving {
        if graph.task(id.as_str()).is_some() {
            return Err(Error::Scenario(format!("task `{id}` is listed and also arrives later")));
        }
    }

    let mut sim = Sim {
        sc: scenario,
        graph,
        ledger,
        minter,
        failed: BTreeSet::new(),
        stopped: BTreeSet::new(),
        pressure: BTreeMap::new(),
        alerted: BTreeSet::new(),
        log: Vec::new(),
        migrations: Vec::new(),
        utilization: Vec::new(),
        rounds: 0,
        busy_until: 0.0,
    };

    let initial = sim.pending();
    if !initial.is_empty() {
        sim.plan_round(initial, &BTreeSet::new(), 0.0, MigrationCause::Arrival, 0)?;
    }
    let initial_plan = sim.view();

    let tick = scenario.sim.tick;
    let last_event = events.last().map_or(0.0, |(_, e)| e.at);
    let mut next = 0;
    let mut k: u64 = 0;
    loop {
        let now = k as f64 * tick;
        while next < events.len() && events[next].1.at <= now {
            sim.handle(events[next].1, now)?;
            next += 1;
        }
        sim.monitor(now)?;
        sim.sample(now);
        let end = scenario.sim.horizon.unwrap_or_else(|| last_event.max(sim.busy_until));
        if next >= events.len() && now >= end {
            break;
        }
        k += 1;
        if k > 50_000_000 {
            return Err(Error::Scenario("simulation exceeds 5e7 ticks".into()));
        }
    }

    let invariant_violations = sim.invariant_violations();
    Ok(SimReport {
        effective_seed: scenario.aco.seed,
        initial_plan,
        final_plan: sim.view(),
        event_log: sim.log,
        migrations: sim.migrations,
        utilization: sim.utilization,
        gas_total: sim.ledger.gas_total(),
        ledger_events: sim.ledger.log().to_vec(),
        invariant_violations,
    })
}

fn width(n: usize) -> usize {
    n.saturating_sub(1).max(1).to_string().len()
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

/// Layered random topology: devices attach to edge nodes, edge to fog, fog
/// to cloud. Nodes of one layer form a chain so every layer is connected.
pub fn generate_synthetic(spec: &GeneratorSpec, seed: u64) -> Result<Scenario> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = InfraGraph::new();

    let layer_ids = |prefix: &str, n: usize| -> Vec<NodeId> {
        (0..n)
            .map(|i| NodeId::new(format!("{prefix}-{i:0w$}", w = width(n))))
            .collect()
    };
    let clouds = layer_ids("cloud", spec.cloud);
    let fogs = layer_ids("fog", spec.fog);
    let edges = layer_ids("edge", spec.edge);
    let devices = layer_ids("dev", spec.devices);

    for id in &clouds {
        let cores = rng.gen_range(32..=64u64);
        let freq = uniform(&mut rng, 2.5e9, 3.5e9);
        let ram = rng.gen_range(64..=128u64) * GIB;
        let storage = rng.gen_range(1024..=2048u64) * GIB;
        g.upsert_node(NodeRecord::compute(id.clone(), Layer::Cloud, freq, cores * 1000, ram, storage))?;
    }
    for id in &fogs {
        let cores = rng.gen_range(8..=16u64);
        let freq = uniform(&mut rng, 2.0e9, 3.0e9);
        let ram = rng.gen_range(16..=32u64) * GIB;
        let storage = rng.gen_range(256..=512u64) * GIB;
        g.upsert_node(NodeRecord::compute(id.clone(), Layer::Fog, freq, cores * 1000, ram, storage))?;
    }
    for id in &edges {
        let cores = rng.gen_range(2..=4u64);
        let freq = uniform(&mut rng, 1.5e9, 2.5e9);
        let ram = rng.gen_range(4..=8u64) * GIB;
        let storage = rng.gen_range(32..=64u64) * GIB;
        g.upsert_node(NodeRecord::compute(id.clone(), Layer::Edge, freq, cores * 1000, ram, storage))?;
    }
    for id in &devices {
        g.upsert_node(NodeRecord::device(id.clone()))?;
    }

    let mut links = Vec::new();
    let mut chain = |ids: &[NodeId], rng: &mut ChaCha8Rng, lat: (f64, f64), bw: (f64, f64)| {
        for w in ids.windows(2) {
            links.push(LinkRecord::new(
                w[0].clone(),
                w[1].clone(),
                uniform(rng, lat.0, lat.1),
                uniform(rng, bw.0, bw.1),
            ));
        }
    };
    chain(&clouds, &mut rng, (0.005, 0.020), (6.25e7, 1.25e8));
    chain(&fogs, &mut rng, (0.005, 0.010), (1.25e7, 6.25e7));
    chain(&edges, &mut rng, (0.002, 0.005), (6.25e6, 1.25e7));
    for f in &fogs {
        let up = clouds.choose(&mut rng).expect("fog needs a cloud above").clone();
        links.push(LinkRecord::new(
            f.clone(),
            up,
            uniform(&mut rng, 0.020, 0.050),
            uniform(&mut rng, 1.25e7, 2.5e7),
        ));
    }
    for e in &edges {
        let (up, lat) = match fogs.choose(&mut rng) {
            Some(f) => (f.clone(), (0.005, 0.015)),
            None => match clouds.choose(&mut rng) {
                Some(c) => (c.clone(), (0.030, 0.060)),
                None => continue,
            },
        };
        links.push(LinkRecord::new(
            e.clone(),
            up,
            uniform(&mut rng, lat.0, lat.1),
            uniform(&mut rng, 1.25e6, 1.25e7),
        ));
    }
    let access: &[NodeId] = if !edges.is_empty() {
        &edges
    } else if !fogs.is_empty() {
        &fogs
    } else {
        &clouds
    };
    for d in &devices {
        if access.is_empty() {
            break;
        }
        let fanout = rng.gen_range(1..=2usize).min(access.len());
        for up in access.choose_multiple(&mut rng, fanout) {
            links.push(LinkRecord::new(
                d.clone(),
                up.clone(),
                uniform(&mut rng, 0.001, 0.005),
                uniform(&mut rng, 1.25e5, 1.25e6),
            ));
        }
    }
    for l in links {
        g.upsert_link(l)?;
    }

    for i in 0..spec.tasks {
        let heavy = rng.gen_bool(0.2);
        let source = devices.choose(&mut rng).expect("validated").clone();
        // Outputs go to a device endpoint, never to a compute node.
        let sink = devices.choose(&mut rng).expect("validated").clone();
        let (cycles, cpu, ram, exe) = if heavy {
            (
                uniform(&mut rng, 4e9, 2e10),
                rng.gen_range(2500..=6000u64),
                rng.gen_range(9 * 1024..=16 * 1024u64) * MIB,
                rng.gen_range(200..=800u64) * MIB,
            )
        } else {
            (
                uniform(&mut rng, 1e8, 4e9),
                rng.gen_range(100..=1500u64),
                rng.gen_range(64..=2048u64) * MIB,
                rng.gen_range(10..=200u64) * MIB,
            )
        };
        g.upsert_task(TaskSpec {
            id: TaskId::new(format!("task-{i:0w$}", w = width(spec.tasks))),
            cycles,
            input_size: rng.gen_range(1024..=1024 * 1024u64),
            output_size: rng.gen_range(1024..=256 * 1024u64),
            exe_size: exe,
            req_cpu: cpu,
            req_ram: ram,
            source_device: source,
            sink_node: sink,
        })?;
    }

    let mut s = Scenario::from_graph(&g);
    s.aco.seed = seed;
    s.generator = Some(spec.clone());
    Ok(s)
}
