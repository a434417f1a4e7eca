//! Pre-optimization candidate filtering.
//!
//! A compute node is a candidate for an unassigned task when it is reachable
//! from the task's source device, can reach the task's sink, and currently
//! has room for the task's footprint. Each candidate carries the latency and
//! aggregated bandwidth of its input and output paths.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{InfraGraph, NodeId, PathTree, TaskId, TaskSpec, Topology};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateEntry {
    pub node_id: NodeId,
    pub lat_in: f64,
    #[serde(with = "crate::serde_util")]
    pub bw_in: f64,
    pub lat_out: f64,
    #[serde(with = "crate::serde_util")]
    pub bw_out: f64,
}

/// Per-task candidate lists, each sorted by ascending node id.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CandidateMap {
    entries: BTreeMap<TaskId, Vec<CandidateEntry>>,
}

impl CandidateMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, task: TaskId, mut entries: Vec<CandidateEntry>) {
        entries.sort_by(|a, b| a.node_id.cmp(&b.node_id));
        self.entries.insert(task, entries);
    }

    pub fn get(&self, task: &str) -> Option<&[CandidateEntry]> {
        self.entries.get(task).map(Vec::as_slice)
    }

    pub fn contains(&self, task: &str) -> bool {
        self.entries.contains_key(task)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TaskId, &[CandidateEntry])> {
        self.entries.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn tasks(&self) -> impl Iterator<Item = &TaskId> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of (task, node) pairs.
    pub fn pair_count(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn sizes(&self) -> BTreeMap<TaskId, usize> {
        self.entries.iter().map(|(k, v)| (k.clone(), v.len())).collect()
    }

    pub fn mean_size(&self) -> f64 {
        if self.entries.is_empty() {
            0.0
        } else {
            self.pair_count() as f64 / self.entries.len() as f64
        }
    }

    /// Drops every entry pointing at one of `nodes`.
    pub fn exclude_nodes(&mut self, nodes: &BTreeSet<NodeId>) {
        for list in self.entries.values_mut() {
            list.retain(|e| !nodes.contains(&e.node_id));
        }
    }
}

fn check_anchors(graph: &InfraGraph, task: &TaskSpec) -> Result<()> {
    for anchor in [&task.source_device, &task.sink_node] {
        if graph.node(anchor.as_str()).is_none() {
            return Err(Error::UnknownNode(anchor.clone()));
        }
    }
    Ok(())
}

fn entry_from_trees(
    topo: &Topology,
    tree_in: &PathTree,
    tree_out: &PathTree,
    node: usize,
    sink: usize,
) -> Option<CandidateEntry> {
    let p_in = topo.summarize(tree_in, node)?;
    let p_out = topo.summarize(tree_out, sink)?;
    Some(CandidateEntry {
        node_id: topo.id(node).clone(),
        lat_in: p_in.total_latency,
        bw_in: p_in.avg_bandwidth,
        lat_out: p_out.total_latency,
        bw_out: p_out.avg_bandwidth,
    })
}

/// Builds the candidate map for every task in `tasks` that is not yet
/// assigned in `graph`. Tasks with no feasible node map to an empty list.
pub fn filter_candidates(graph: &InfraGraph, tasks: &[TaskSpec]) -> Result<CandidateMap> {
    for t in tasks {
        check_anchors(graph, t)?;
    }
    let pending: Vec<&TaskSpec> = tasks.iter().filter(|t| !graph.is_assigned(t.id.as_str())).collect();

    let topo = graph.topology();
    let compute: Vec<(usize, crate::graph::Resources)> = graph
        .compute_nodes()
        .map(|n| (topo.index(&n.id).expect("node indexed"), n.available()))
        .collect();

    // One tree per distinct source device and one per compute node; output
    // paths start at the candidate, input paths at the device.
    let mut roots: BTreeSet<usize> = compute.iter().map(|(i, _)| *i).collect();
    roots.extend(pending.iter().map(|t| topo.index(&t.source_device).expect("checked")));
    let trees: BTreeMap<usize, PathTree> = roots
        .into_par_iter()
        .map(|r| (r, topo.paths_from(r)))
        .collect();

    let lists: Vec<(TaskId, Vec<CandidateEntry>)> = pending
        .par_iter()
        .map(|task| {
            let req = task.requirements();
            let tree_in = &trees[&topo.index(&task.source_device).expect("checked")];
            let sink = topo.index(&task.sink_node).expect("checked");
            let list = compute
                .iter()
                .filter(|(_, avail)| req.fits_within(avail))
                .filter(|(node, _)| tree_in.reaches(*node))
                .filter_map(|(node, _)| entry_from_trees(&topo, tree_in, &trees[node], *node, sink))
                .collect();
            (task.id.clone(), list)
        })
        .collect();

    let mut map = CandidateMap::new();
    for (task, list) in lists {
        map.insert(task, list);
    }
    Ok(map)
}

/// Re-evaluates the three filtering rules for a single (task, node) pair.
pub fn refresh_entry(
    graph: &InfraGraph,
    task: &TaskSpec,
    node_id: &NodeId,
) -> Result<Option<CandidateEntry>> {
    check_anchors(graph, task)?;
    let node = graph
        .node(node_id.as_str())
        .ok_or_else(|| Error::UnknownNode(node_id.clone()))?;
    if !node.is_compute() || !task.requirements().fits_within(&node.available()) {
        return Ok(None);
    }
    let Some(p_in) = graph.best_path(&task.source_device, node_id)? else {
        return Ok(None);
    };
    let Some(p_out) = graph.best_path(node_id, &task.sink_node)? else {
        return Ok(None);
    };
    Ok(Some(CandidateEntry {
        node_id: node_id.clone(),
        lat_in: p_in.total_latency,
        bw_in: p_in.avg_bandwidth,
        lat_out: p_out.total_latency,
        bw_out: p_out.avg_bandwidth,
    }))
}
