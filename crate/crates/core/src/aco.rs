//! Ant colony optimization over the candidate map.
//!
//! Every ant visits the tasks in its own shuffled order, samples a node per
//! task with probability proportional to `τ^α · η^β` among the candidates
//! that still fit given the resources this ant has already consumed, and
//! leaves the task unassigned when none fit. After each iteration all
//! pheromones evaporate and the best-so-far plan is reinforced.
//!
//! Plans are ranked lexicographically: more assigned tasks first, then a
//! lower mean cost over the assigned tasks.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{self, CostBreakdown, CostWeights};
use crate::error::{Error, Result};
use crate::filter::{CandidateEntry, CandidateMap};
use crate::graph::{InfraGraph, NodeId, Resources, TaskId, TaskSpec};

/// Upper bound on η, used when both paths have zero latency.
pub const ETA_CAP: f64 = 1e12;
/// Stand-in for an unbounded path bandwidth inside η.
pub const BANDWIDTH_CAP: f64 = 1e12;
/// Largest search space `brute_force` will enumerate.
pub const BRUTE_FORCE_LIMIT: u64 = 10_000_000;

pub type AntRng = ChaCha8Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcoParams {
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub tau0: f64,
    pub n_ants: usize,
    pub n_iters: usize,
    pub seed: u64,
    pub q: f64,
    /// Defaults to `0.01 · tau0`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_min: Option<f64>,
    /// Defaults to `100 · tau0`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_max: Option<f64>,
    /// When false, pheromones are only kept positive and finite.
    pub clamp: bool,
    /// Worker threads for ant construction. Results do not depend on it.
    pub threads: usize,
}

impl Default for AcoParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 2.0,
            rho: 0.1,
            tau0: 1.0,
            n_ants: 20,
            n_iters: 100,
            seed: 0,
            q: 1.0,
            tau_min: None,
            tau_max: None,
            clamp: true,
            threads: 1,
        }
    }
}

impl AcoParams {
    /// Effective pheromone bounds.
    pub fn bounds(&self) -> (f64, f64) {
        if self.clamp {
            (
                self.tau_min.unwrap_or(0.01 * self.tau0),
                self.tau_max.unwrap_or(100.0 * self.tau0),
            )
        } else {
            (f64::MIN_POSITIVE, f64::MAX)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("rho must lie in (0, 1), got {}", self.rho));
        }
        if !(self.tau0.is_finite() && self.tau0 > 0.0) {
            return bad(format!("tau0 must be positive, got {}", self.tau0));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0 && self.beta.is_finite() && self.beta >= 0.0) {
            return bad("alpha and beta must be finite and nonnegative".into());
        }
        if !(self.q.is_finite() && self.q > 0.0) {
            return bad(format!("q must be positive, got {}", self.q));
        }
        if self.n_ants == 0 || self.n_iters == 0 {
            return bad("n_ants and n_iters must be positive".into());
        }
        let (lo, hi) = self.bounds();
        if !(lo > 0.0 && lo <= self.tau0 && self.tau0 <= hi) {
            return bad(format!("need 0 < tau_min <= tau0 <= tau_max, got {lo} / {} / {hi}", self.tau0));
        }
        Ok(())
    }
}

/// Optional multiplier on η carrying grid-specific desirability.
pub trait GridFactor: Sync {
    fn factor(&self, task: &TaskSpec, entry: &CandidateEntry) -> f64;
}

/// The identity multiplier.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformGrid;

impl GridFactor for UniformGrid {
    fn factor(&self, _task: &TaskSpec, _entry: &CandidateEntry) -> f64 {
        1.0
    }
}

/// `(bw_in + bw_out) / (lat_in + lat_out)`, with unbounded bandwidths and
/// zero latency both capped.
pub fn heuristic_value(entry: &CandidateEntry) -> f64 {
    let bw = entry.bw_in.min(BANDWIDTH_CAP) + entry.bw_out.min(BANDWIDTH_CAP);
    let lat = entry.lat_in + entry.lat_out;
    if lat <= 0.0 {
        ETA_CAP
    } else {
        (bw / lat).min(ETA_CAP)
    }
}

/// Normalizes nonnegative weights into a distribution. Falls back to uniform
/// when the weights carry no mass.
pub fn selection_probabilities(weights: &[f64]) -> Vec<f64> {
    let sum: f64 = weights.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        weights.iter().map(|w| w / sum).collect()
    } else {
        vec![1.0 / weights.len() as f64; weights.len()]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub node_id: NodeId,
    pub cost: CostBreakdown,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlacementPlan {
    pub assignments: BTreeMap<TaskId, Placement>,
    pub unassigned: BTreeSet<TaskId>,
    pub mean_cost: Option<f64>,
    pub assigned_count: usize,
}

impl PlacementPlan {
    pub fn rank(&self) -> PlanRank {
        PlanRank {
            assigned: self.assigned_count,
            mean_cost: self.mean_cost,
        }
    }

    pub fn node_of(&self, task: &str) -> Option<&NodeId> {
        self.assignments.get(task).map(|p| &p.node_id)
    }

    pub fn assignment_ratio(&self) -> f64 {
        let n = self.assigned_count + self.unassigned.len();
        if n == 0 {
            1.0
        } else {
            self.assigned_count as f64 / n as f64
        }
    }

    /// Replays the assignments against the graph's available resources.
    pub fn check_feasible(&self, graph: &InfraGraph, tasks: &[TaskSpec]) -> Result<()> {
        let specs: BTreeMap<&str, &TaskSpec> = tasks.iter().map(|t| (t.id.as_str(), t)).collect();
        let mut used: BTreeMap<&NodeId, Resources> = BTreeMap::new();
        for (task, p) in &self.assignments {
            let spec = specs
                .get(task.as_str())
                .copied()
                .or_else(|| graph.task(task.as_str()))
                .ok_or_else(|| Error::UnknownTask(task.clone()))?;
            let node = graph
                .node(p.node_id.as_str())
                .ok_or_else(|| Error::UnknownNode(p.node_id.clone()))?;
            let acc = used.entry(&p.node_id).or_default();
            *acc = acc.saturating_add(&spec.requirements());
            if !acc.fits_within(&node.available()) || !node.is_compute() {
                return Err(Error::Infeasible {
                    task: task.clone(),
                    node: p.node_id.clone(),
                    reason: "cumulative requirements exceed available resources".into(),
                });
            }
        }
        Ok(())
    }
}

/// Lexicographic plan quality: more assigned tasks, then lower mean cost.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRank {
    pub assigned: usize,
    pub mean_cost: Option<f64>,
}

impl PlanRank {
    /// `Less` means `self` is the better plan.
    pub fn compare(&self, other: &PlanRank) -> Ordering {
        other.assigned.cmp(&self.assigned).then_with(|| {
            let a = self.mean_cost.unwrap_or(f64::INFINITY);
            let b = other.mean_cost.unwrap_or(f64::INFINITY);
            a.total_cmp(&b)
        })
    }

    pub fn better_than(&self, other: &PlanRank) -> bool {
        self.compare(other) == Ordering::Less
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub assigned: usize,
    pub mean_cost: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AcoDiagnostics {
    /// Largest `|Σp − 1|` over every sampling step.
    pub max_normalization_error: f64,
    pub pheromone_min: f64,
    pub pheromone_max: f64,
    /// Pheromones stayed inside the bounds after every iteration.
    pub bounds_respected: bool,
    /// The incumbent never got worse.
    pub incumbent_monotone: bool,
}

#[derive(Clone, Debug)]
pub struct AcoOutcome {
    pub plan: PlacementPlan,
    pub trace: Vec<IterationRecord>,
    pub diagnostics: AcoDiagnostics,
    pub pheromones: PheromoneTable,
}

/// Pheromone per valid (task, candidate) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PheromoneTable {
    tasks: Vec<TaskId>,
    nodes: Vec<Vec<NodeId>>,
    values: Vec<Vec<f64>>,
}

impl PheromoneTable {
    pub fn get(&self, task: &str, node: &str) -> Option<f64> {
        let i = self.tasks.iter().position(|t| t.as_str() == task)?;
        let k = self.nodes[i].iter().position(|n| n.as_str() == node)?;
        Some(self.values[i][k])
    }

    pub fn set(&mut self, task: &str, node: &str, value: f64) -> bool {
        let Some(i) = self.tasks.iter().position(|t| t.as_str() == task) else {
            return false;
        };
        let Some(k) = self.nodes[i].iter().position(|n| n.as_str() == node) else {
            return false;
        };
        self.values[i][k] = value;
        true
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TaskId, &NodeId, f64)> {
        self.tasks.iter().enumerate().flat_map(move |(i, t)| {
            self.nodes[i]
                .iter()
                .zip(&self.values[i])
                .map(move |(n, v)| (t, n, *v))
        })
    }

    pub fn len(&self) -> usize {
        self.values.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn range(&self) -> (f64, f64) {
        self.values
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)))
    }
}

#[derive(Clone, Debug)]
struct Candidate {
    node: usize,
    cost: CostBreakdown,
    ln_eta: f64,
}

#[derive(Clone, Debug)]
struct ColonyTask {
    id: TaskId,
    req: Resources,
    candidates: Vec<Candidate>,
}

struct Construction {
    choice: Vec<Option<usize>>,
    max_normalization_error: f64,
}

/// A prepared problem instance: tasks with their candidate costs and η, and
/// the starting resources of every candidate node.
#[derive(Clone, Debug)]
pub struct Colony {
    tasks: Vec<ColonyTask>,
    nodes: Vec<(NodeId, Resources)>,
}

impl Colony {
    pub fn new(
        graph: &InfraGraph,
        tasks: &[TaskSpec],
        candidates: &CandidateMap,
        weights: &CostWeights,
    ) -> Result<Self> {
        Self::with_grid_factor(graph, tasks, candidates, weights, &UniformGrid)
    }

    pub fn with_grid_factor(
        graph: &InfraGraph,
        tasks: &[TaskSpec],
        candidates: &CandidateMap,
        weights: &CostWeights,
        grid: &dyn GridFactor,
    ) -> Result<Self> {
        let mut specs: BTreeMap<&TaskId, &TaskSpec> = BTreeMap::new();
        for t in tasks.iter().filter(|t| candidates.contains(t.id.as_str())) {
            specs.insert(&t.id, t);
        }
        let node_ids: BTreeSet<&NodeId> = specs
            .keys()
            .flat_map(|t| candidates.get(t.as_str()).unwrap_or_default())
            .map(|e| &e.node_id)
            .collect();
        let mut nodes = Vec::with_capacity(node_ids.len());
        let mut node_index = BTreeMap::new();
        for id in node_ids {
            let rec = graph.node(id.as_str()).ok_or_else(|| Error::UnknownNode(id.clone()))?;
            node_index.insert(id.clone(), nodes.len());
            nodes.push((id.clone(), rec.available()));
        }
        let mut colony_tasks = Vec::with_capacity(specs.len());
        for (id, spec) in specs {
            let entries = candidates.get(id.as_str()).unwrap_or_default();
            let mut costs = entries
                .iter()
                .map(|e| {
                    let rec = graph.node(e.node_id.as_str()).expect("indexed above");
                    cost::pair_cost(spec, rec, e, weights)
                })
                .collect::<Result<Vec<_>>>()?;
            if weights.normalize() && !costs.is_empty() {
                cost::normalize_components(&mut costs, weights);
            }
            let candidates = entries
                .iter()
                .zip(costs)
                .map(|(e, cost)| Candidate {
                    node: node_index[&e.node_id],
                    cost,
                    ln_eta: (heuristic_value(e) * grid.factor(spec, e)).ln(),
                })
                .collect();
            colony_tasks.push(ColonyTask {
                id: id.clone(),
                req: spec.requirements(),
                candidates,
            });
        }
        Ok(Self {
            tasks: colony_tasks,
            nodes,
        })
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    /// Number of mappings `brute_force` would have to consider.
    pub fn search_space(&self) -> f64 {
        self.tasks
            .iter()
            .map(|t| t.candidates.len().max(1) as f64)
            .product()
    }

    pub fn initial_pheromones(&self, params: &AcoParams) -> PheromoneTable {
        PheromoneTable {
            tasks: self.tasks.iter().map(|t| t.id.clone()).collect(),
            nodes: self
                .tasks
                .iter()
                .map(|t| t.candidates.iter().map(|c| self.nodes[c.node].0.clone()).collect())
                .collect(),
            values: self
                .tasks
                .iter()
                .map(|t| vec![params.tau0; t.candidates.len()])
                .collect(),
        }
    }

    /// Per-task sampling weights `τ^α · η^β`, scaled by the task's largest
    /// weight (computed in log space so large η^β cannot overflow).
    fn selection_weights(&self, tau: &[Vec<f64>], params: &AcoParams) -> Vec<Vec<f64>> {
        self.tasks
            .iter()
            .zip(tau)
            .map(|(task, tau)| {
                let logs: Vec<f64> = task
                    .candidates
                    .iter()
                    .zip(tau)
                    .map(|(c, t)| {
                        let a = if params.alpha == 0.0 { 0.0 } else { params.alpha * t.ln() };
                        let b = if params.beta == 0.0 { 0.0 } else { params.beta * c.ln_eta };
                        a + b
                    })
                    .collect();
                let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if top.is_finite() {
                    logs.iter().map(|l| (l - top).exp()).collect()
                } else {
                    vec![1.0; logs.len()]
                }
            })
            .collect()
    }

    fn construct(&self, weights: &[Vec<f64>], rng: &mut AntRng) -> Construction {
        let mut order: Vec<usize> = (0..self.tasks.len()).collect();
        order.shuffle(rng);
        let mut remaining: Vec<Resources> = self.nodes.iter().map(|(_, r)| *r).collect();
        let mut choice = vec![None; self.tasks.len()];
        let mut max_err: f64 = 0.0;
        let mut feasible = Vec::new();
        let mut w = Vec::new();
        for i in order {
            let task = &self.tasks[i];
            feasible.clear();
            w.clear();
            for (k, c) in task.candidates.iter().enumerate() {
                if task.req.fits_within(&remaining[c.node]) {
                    feasible.push(k);
                    w.push(weights[i][k]);
                }
            }
            if feasible.is_empty() {
                continue;
            }
            let probs = selection_probabilities(&w);
            max_err = max_err.max((probs.iter().sum::<f64>() - 1.0).abs());
            let r: f64 = rng.gen();
            let mut acc = 0.0;
            let mut pick = *feasible.last().expect("nonempty");
            for (&k, p) in feasible.iter().zip(&probs) {
                acc += p;
                if r < acc {
                    pick = k;
                    break;
                }
            }
            let node = task.candidates[pick].node;
            remaining[node] = remaining[node].checked_sub(&task.req).expect("feasibility checked");
            choice[i] = Some(pick);
        }
        Construction {
            choice,
            max_normalization_error: max_err,
        }
    }

    fn rank_of(&self, choice: &[Option<usize>]) -> PlanRank {
        let (sum, n) = self
            .tasks
            .iter()
            .zip(choice)
            .filter_map(|(t, c)| c.map(|k| t.candidates[k].cost.total))
            .fold((0.0, 0usize), |(s, n), c| (s + c, n + 1));
        PlanRank {
            assigned: n,
            mean_cost: (n > 0).then(|| sum / n as f64),
        }
    }

    fn to_plan(&self, choice: &[Option<usize>]) -> PlacementPlan {
        let mut plan = PlacementPlan::default();
        for (t, c) in self.tasks.iter().zip(choice) {
            match c {
                Some(k) => {
                    let cand = &t.candidates[*k];
                    plan.assignments.insert(
                        t.id.clone(),
                        Placement {
                            node_id: self.nodes[cand.node].0.clone(),
                            cost: cand.cost,
                        },
                    );
                }
                None => {
                    plan.unassigned.insert(t.id.clone());
                }
            }
        }
        let rank = self.rank_of(choice);
        plan.assigned_count = rank.assigned;
        plan.mean_cost = rank.mean_cost;
        plan
    }

    fn table_values(&self, table: &PheromoneTable) -> Vec<Vec<f64>> {
        self.tasks
            .iter()
            .map(|t| {
                t.candidates
                    .iter()
                    .map(|c| table.get(t.id.as_str(), self.nodes[c.node].0.as_str()).unwrap_or(0.0))
                    .collect()
            })
            .collect()
    }

    /// Builds one ant's solution from the given pheromones.
    pub fn construct_solution(
        &self,
        pheromones: &PheromoneTable,
        params: &AcoParams,
        rng: &mut AntRng,
    ) -> PlacementPlan {
        let weights = self.selection_weights(&self.table_values(pheromones), params);
        self.to_plan(&self.construct(&weights, rng).choice)
    }

    pub fn optimize(&self, params: &AcoParams) -> Result<AcoOutcome> {
        params.validate()?;
        let (tau_lo, tau_hi) = params.bounds();
        let mut pheromones = self.initial_pheromones(params);
        let mut best: Option<(Vec<Option<usize>>, PlanRank)> = None;
        let mut trace = Vec::with_capacity(params.n_iters);
        let mut diag = AcoDiagnostics {
            bounds_respected: true,
            incumbent_monotone: true,
            ..Default::default()
        };
        let pool = if params.threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(params.threads)
                    .build()
                    .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };

        for iter in 0..params.n_iters {
            let weights = self.selection_weights(&pheromones.values, params);
            let run_ant = |ant: usize| {
                let mut rng = ant_rng(params.seed, iter, ant);
                self.construct(&weights, &mut rng)
            };
            let ants: Vec<Construction> = match &pool {
                Some(pool) => pool.install(|| (0..params.n_ants).into_par_iter().map(run_ant).collect()),
                None => (0..params.n_ants).map(run_ant).collect(),
            };
            for ant in ants {
                diag.max_normalization_error = diag.max_normalization_error.max(ant.max_normalization_error);
                let rank = self.rank_of(&ant.choice);
                if best.as_ref().is_none_or(|(_, b)| rank.better_than(b)) {
                    best = Some((ant.choice, rank));
                }
            }

            for v in pheromones.values.iter_mut().flatten() {
                *v *= 1.0 - params.rho;
            }
            if let Some((choice, rank)) = &best {
                let deposit = match rank.mean_cost {
                    Some(m) if m > 0.0 => params.q / m,
                    _ => params.q,
                };
                if rank.assigned > 0 {
                    for (i, c) in choice.iter().enumerate() {
                        if let Some(k) = c {
                            pheromones.values[i][*k] += deposit;
                        }
                    }
                }
            }
            for v in pheromones.values.iter_mut().flatten() {
                *v = v.clamp(tau_lo, tau_hi);
            }
            let (lo, hi) = pheromones.range();
            if !pheromones.is_empty() && (lo < tau_lo || hi > tau_hi) {
                diag.bounds_respected = false;
            }

            let rank = best.as_ref().map(|(_, r)| *r).expect("at least one ant ran");
            if let Some(prev) = trace.last() {
                let prev: &IterationRecord = prev;
                let prev_rank = PlanRank {
                    assigned: prev.assigned,
                    mean_cost: prev.mean_cost,
                };
                if prev_rank.better_than(&rank) {
                    diag.incumbent_monotone = false;
                }
            }
            trace.push(IterationRecord {
                iteration: iter + 1,
                assigned: rank.assigned,
                mean_cost: rank.mean_cost,
            });
        }

        let (lo, hi) = pheromones.range();
        diag.pheromone_min = if pheromones.is_empty() { params.tau0 } else { lo };
        diag.pheromone_max = if pheromones.is_empty() { params.tau0 } else { hi };
        let choice = best.map(|(c, _)| c).unwrap_or_else(|| vec![None; self.tasks.len()]);
        Ok(AcoOutcome {
            plan: self.to_plan(&choice),
            trace,
            diagnostics: diag,
            pheromones,
        })
    }

    /// Exhaustive search over every resource-feasible mapping, partial ones
    /// included. Among equally ranked plans the first in task-then-node id
    /// order wins (a task's "unassigned" option comes after its nodes).
    pub fn brute_force(&self) -> Result<PlacementPlan> {
        let size = self.search_space();
        if size > BRUTE_FORCE_LIMIT as f64 {
            return Err(Error::InstanceTooLarge {
                size,
                limit: BRUTE_FORCE_LIMIT,
            });
        }
        let mut search = Exhaustive {
            colony: self,
            remaining: self.nodes.iter().map(|(_, r)| *r).collect(),
            choice: vec![None; self.tasks.len()],
            best: None,
        };
        search.descend(0, 0.0, 0);
        let choice = search
            .best
            .map(|(c, _)| c)
            .unwrap_or_else(|| vec![None; self.tasks.len()]);
        Ok(self.to_plan(&choice))
    }
}

struct Exhaustive<'a> {
    colony: &'a Colony,
    remaining: Vec<Resources>,
    choice: Vec<Option<usize>>,
    best: Option<(Vec<Option<usize>>, PlanRank)>,
}

impl Exhaustive<'_> {
    fn descend(&mut self, i: usize, sum: f64, assigned: usize) {
        let tasks = &self.colony.tasks;
        if let Some((_, b)) = &self.best {
            if assigned + (tasks.len() - i) < b.assigned {
                return;
            }
        }
        if i == tasks.len() {
            let rank = PlanRank {
                assigned,
                mean_cost: (assigned > 0).then(|| sum / assigned as f64),
            };
            if self.best.as_ref().is_none_or(|(_, b)| rank.better_than(b)) {
                self.best = Some((self.choice.clone(), rank));
            }
            return;
        }
        let task = &tasks[i];
        for (k, c) in task.candidates.iter().enumerate() {
            let Some(left) = self.remaining[c.node].checked_sub(&task.req) else {
                continue;
            };
            let saved = std::mem::replace(&mut self.remaining[c.node], left);
            self.choice[i] = Some(k);
            self.descend(i + 1, sum + c.cost.total, assigned + 1);
            self.remaining[c.node] = saved;
        }
        self.choice[i] = None;
        self.descend(i + 1, sum, assigned);
    }
}

/// Independent random stream for one ant in one iteration.
pub fn ant_rng(seed: u64, iteration: usize, ant: usize) -> AntRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((iteration as u64) << 32) | (ant as u64 & 0xffff_ffff));
    rng
}

pub fn optimize(
    graph: &InfraGraph,
    tasks: &[TaskSpec],
    candidates: &CandidateMap,
    weights: &CostWeights,
    params: &AcoParams,
) -> Result<AcoOutcome> {
    Colony::new(graph, tasks, candidates, weights)?.optimize(params)
}

pub fn brute_force(
    graph: &InfraGraph,
    tasks: &[TaskSpec],
    candidates: &CandidateMap,
    weights: &CostWeights,
) -> Result<PlacementPlan> {
    Colony::new(graph, tasks, candidates, weights)?.brute_force()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::filter_candidates;
    use crate::graph::{Layer, LinkRecord, NodeRecord, GIB};

    fn entry(bw: f64, lat: f64) -> CandidateEntry {
        CandidateEntry {
            node_id: "n".into(),
            lat_in: lat,
            bw_in: bw,
            lat_out: lat,
            bw_out: bw,
        }
    }

    #[test]
    fn heuristic_examples() {
        let eta = heuristic_value(&entry(1e6, 0.010));
        assert!(((eta - 1e8) / 1e8).abs() < 1e-12);
        let co_located = CandidateEntry {
            lat_in: 0.0,
            lat_out: 0.0,
            bw_in: f64::INFINITY,
            bw_out: f64::INFINITY,
            ..entry(1.0, 0.0)
        };
        assert_eq!(heuristic_value(&co_located), ETA_CAP);
        let e = entry(3e5, 0.004);
        assert_eq!(heuristic_value(&entry(6e5, 0.004)), 2.0 * heuristic_value(&e));
    }

    #[test]
    fn probabilities_examples() {
        assert_eq!(selection_probabilities(&[2.0, 2.0]), vec![0.5, 0.5]);
        // alpha = 0, beta = 1, eta = (3, 1)
        assert_eq!(selection_probabilities(&[3.0, 1.0]), vec![0.75, 0.25]);
        assert_eq!(selection_probabilities(&[0.0, 0.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn params_validation() {
        assert!(AcoParams::default().validate().is_ok());
        for bad in [
            AcoParams { rho: 1.0, ..Default::default() },
            AcoParams { rho: 0.0, ..Default::default() },
            AcoParams { tau0: 0.0, ..Default::default() },
            AcoParams { n_ants: 0, ..Default::default() },
            AcoParams { alpha: -1.0, ..Default::default() },
            AcoParams { tau_min: Some(2.0), ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::InvalidParams(_))), "{bad:?}");
        }
        let p: AcoParams = serde_json::from_str(r#"{"n_iters": 5}"#).unwrap();
        assert_eq!((p.n_iters, p.n_ants, p.beta), (5, 20, 2.0));
        assert!(serde_json::from_str::<AcoParams>(r#"{"n_iter": 5}"#).is_err());
    }

    fn two_node_graph(ram_b: u64) -> (InfraGraph, Vec<TaskSpec>) {
        let mut g = InfraGraph::new();
        g.upsert_node(NodeRecord::device("d")).unwrap();
        g.upsert_node(NodeRecord::compute("a", Layer::Edge, 2e9, 2000, GIB, GIB)).unwrap();
        g.upsert_node(NodeRecord::compute("b", Layer::Edge, 3e9, 2000, ram_b, GIB)).unwrap();
        g.upsert_link(LinkRecord::new("d", "a", 0.001, 1e6)).unwrap();
        g.upsert_link(LinkRecord::new("d", "b", 0.002, 1e6)).unwrap();
        let mk = |id: &str| TaskSpec {
            id: id.into(),
            cycles: 1e9,
            input_size: 1000,
            output_size: 0,
            exe_size: 0,
            req_cpu: 100,
            req_ram: 600 << 20,
            source_device: "d".into(),
            sink_node: "d".into(),
        };
        (g, vec![mk("t1"), mk("t2")])
    }

    #[test]
    fn ant_respects_its_own_consumption() {
        let (mut g, tasks) = two_node_graph(GIB);
        // Only node a survives for t2, and a fits one task.
        g.upsert_node(NodeRecord::compute("b", Layer::Edge, 3e9, 2000, 0, GIB)).unwrap();
        let cands = filter_candidates(&g, &tasks).unwrap();
        let colony = Colony::new(&g, &tasks, &cands, &CostWeights::default()).unwrap();
        let pher = colony.initial_pheromones(&AcoParams::default());
        let plan = colony.construct_solution(&pher, &AcoParams::default(), &mut ant_rng(1, 0, 0));
        assert_eq!(plan.assigned_count, 1);
        assert_eq!(plan.unassigned.len(), 1);
        plan.check_feasible(&g, &tasks).unwrap();
    }

    #[test]
    fn forced_single_assignment() {
        let (g, tasks) = two_node_graph(0);
        let tasks = &tasks[..1];
        let cands = filter_candidates(&g, tasks).unwrap();
        let w = CostWeights::default();
        let out = optimize(&g, tasks, &cands, &w, &AcoParams { n_iters: 1, ..Default::default() }).unwrap();
        let node = g.node("a").unwrap();
        let entry = &cands.get("t1").unwrap()[0];
        let expect = cost::pair_cost(&tasks[0], node, entry, &w).unwrap();
        assert_eq!(out.plan.node_of("t1").unwrap().as_str(), "a");
        assert_eq!(out.plan.mean_cost, Some(expect.total));
        assert_eq!(cost::plan_cost(&out.plan, &w), out.plan.mean_cost);
    }

    #[test]
    fn no_candidates_means_all_unassigned() {
        let (g, tasks) = two_node_graph(GIB);
        let mut cands = CandidateMap::new();
        cands.insert("t1".into(), vec![]);
        cands.insert("t2".into(), vec![]);
        let out = optimize(&g, &tasks, &cands, &CostWeights::default(), &AcoParams::default()).unwrap();
        assert_eq!(out.plan.assigned_count, 0);
        assert_eq!(out.plan.unassigned.len(), 2);
        assert_eq!(out.plan.mean_cost, None);
        let bf = brute_force(&g, &tasks, &cands, &CostWeights::default()).unwrap();
        assert_eq!(bf, out.plan);
    }

    #[test]
    fn zero_tasks_brute_force() {
        let (g, _) = two_node_graph(GIB);
        let plan = brute_force(&g, &[], &CandidateMap::new(), &CostWeights::default()).unwrap();
        assert_eq!(plan, PlacementPlan::default());
    }

    #[test]
    fn brute_force_guard() {
        let mut g = InfraGraph::new();
        g.upsert_node(NodeRecord::device("d")).unwrap();
        for i in 0..10 {
            let id = format!("n{i}");
            g.upsert_node(NodeRecord::compute(id.as_str(), Layer::Fog, 1e9, 100_000, 100 * GIB, 100 * GIB))
                .unwrap();
            g.upsert_link(LinkRecord::new("d", id.as_str(), 0.001, 1e6)).unwrap();
        }
        let tasks: Vec<TaskSpec> = (0..8)
            .map(|i| TaskSpec {
                id: format!("t{i}").into(),
                cycles: 1e9,
                input_size: 0,
                output_size: 0,
                exe_size: 0,
                req_cpu: 1,
                req_ram: 1,
                source_device: "d".into(),
                sink_node: "d".into(),
            })
            .collect();
        let cands = filter_candidates(&g, &tasks).unwrap();
        // 10^8 mappings.
        assert!(matches!(
            brute_force(&g, &tasks, &cands, &CostWeights::default()),
            Err(Error::InstanceTooLarge { .. })
        ));
    }

    #[test]
    fn same_seed_same_plan_any_thread_count() {
        let (g, tasks) = two_node_graph(GIB);
        let cands = filter_candidates(&g, &tasks).unwrap();
        let w = CostWeights::default();
        let p1 = AcoParams { seed: 9, n_iters: 30, ..Default::default() };
        let p4 = AcoParams { threads: 4, ..p1.clone() };
        let a = optimize(&g, &tasks, &cands, &w, &p1).unwrap();
        let b = optimize(&g, &tasks, &cands, &w, &p1).unwrap();
        let c = optimize(&g, &tasks, &cands, &w, &p4).unwrap();
        assert_eq!(a.plan, b.plan);
        assert_eq!(a.plan, c.plan);
        assert_eq!(a.trace, c.trace);
        assert_eq!(a.pheromones, c.pheromones);
    }

    #[test]
    fn pheromones_stay_in_bounds_and_incumbent_improves() {
        let (g, tasks) = two_node_graph(GIB);
        let cands = filter_candidates(&g, &tasks).unwrap();
        let params = AcoParams { seed: 3, n_iters: 200, ..Default::default() };
        let out = optimize(&g, &tasks, &cands, &CostWeights::default(), &params).unwrap();
        let (lo, hi) = params.bounds();
        assert!(out.pheromones.iter().all(|(_, _, v)| (lo..=hi).contains(&v)));
        assert!(out.diagnostics.bounds_respected);
        assert!(out.diagnostics.incumbent_monotone);
        assert!(out.diagnostics.max_normalization_error <= 1e-12);
        assert_eq!(out.pheromones.len(), cands.pair_count());
    }

    /// With the output delivered to a compute node, that node's η hits the
    /// cap and the colony almost never samples anything else, even when the
    /// exhaustive optimum lies elsewhere.
    #[test]
    fn co_located_sink_dominates_heuristic() {
        use crate::fixtures;
        let mut g = fixtures::deployed_testbed();
        let task = TaskSpec {
            sink_node: fixtures::CLOUD.into(),
            ..fixtures::green_energy_forecasting_task()
        };
        g.release_assignment(&task.id).unwrap();
        let tasks = [task];
        let mut cands = filter_candidates(&g, &tasks).unwrap();
        cands.exclude_nodes(&BTreeSet::from([fixtures::EDGE_3.into()]));
        let w = CostWeights::default();
        let best = brute_force(&g, &tasks, &cands, &w).unwrap();
        let out = optimize(&g, &tasks, &cands, &w, &AcoParams::default()).unwrap();
        assert_eq!(best.node_of(tasks[0].id.as_str()).unwrap().as_str(), fixtures::EDGE_1);
        assert_eq!(out.plan.node_of(tasks[0].id.as_str()).unwrap().as_str(), fixtures::CLOUD);
    }

    #[test]
    fn plan_rank_ordering() {
        let more = PlanRank { assigned: 3, mean_cost: Some(100.0) };
        let fewer = PlanRank { assigned: 2, mean_cost: Some(1.0) };
        assert!(more.better_than(&fewer));
        let cheaper = PlanRank { assigned: 3, mean_cost: Some(50.0) };
        assert!(cheaper.better_than(&more));
        assert!(!more.better_than(&more));
    }
}
