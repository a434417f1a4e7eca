//! Unified infrastructure and workload graph.
//!
//! Devices, edge/fog/cloud nodes and the links between them live next to the
//! task registry and the `EXECUTES_ON` assignment relation. Path queries run
//! Dijkstra over link latencies; the aggregated bandwidth of the winning path
//! is its arithmetic mean (or bottleneck, when configured).

use std::borrow::Borrow;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Energy coefficient applied when a node record omits one, in J·s²/cycle.
pub const DEFAULT_ENERGY_COEFF: f64 = 1e-27;

/// Milli-cores per physical core.
pub const MILLI_PER_CORE: u64 = 1000;

pub const KIB: u64 = 1 << 10;
pub const MIB: u64 = 1 << 20;
pub const GIB: u64 = 1 << 30;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

string_id!(
    /// Identifier of a device or compute node.
    NodeId
);
string_id!(
    /// Identifier of a workload task.
    TaskId
);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Device,
    Edge,
    Fog,
    Cloud,
}

impl Layer {
    pub fn is_compute(self) -> bool {
        !matches!(self, Layer::Device)
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layer::Device => "device",
            Layer::Edge => "edge",
            Layer::Fog => "fog",
            Layer::Cloud => "cloud",
        })
    }
}

/// A resource vector: CPU in milli-cores, RAM and storage in bytes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Resources {
    pub cpu: u64,
    pub ram: u64,
    pub storage: u64,
}

impl Resources {
    pub const ZERO: Resources = Resources {
        cpu: 0,
        ram: 0,
        storage: 0,
    };

    pub fn new(cpu: u64, ram: u64, storage: u64) -> Self {
        Self { cpu, ram, storage }
    }

    /// True when every component of `self` is at most the matching one in `capacity`.
    pub fn fits_within(&self, capacity: &Resources) -> bool {
        self.cpu <= capacity.cpu && self.ram <= capacity.ram && self.storage <= capacity.storage
    }

    pub fn checked_sub(&self, other: &Resources) -> Option<Resources> {
        Some(Resources {
            cpu: self.cpu.checked_sub(other.cpu)?,
            ram: self.ram.checked_sub(other.ram)?,
            storage: self.storage.checked_sub(other.storage)?,
        })
    }

    pub fn saturating_add(&self, other: &Resources) -> Resources {
        Resources {
            cpu: self.cpu.saturating_add(other.cpu),
            ram: self.ram.saturating_add(other.ram),
            storage: self.storage.saturating_add(other.storage),
        }
    }

    /// Names the first component of `self` that exceeds `capacity`.
    pub fn shortfall(&self, capacity: &Resources) -> Option<&'static str> {
        if self.cpu > capacity.cpu {
            Some("cpu")
        } else if self.ram > capacity.ram {
            Some("ram")
        } else if self.storage > capacity.storage {
            Some("storage")
        } else {
            None
        }
    }
}

fn default_energy_coeff() -> f64 {
    DEFAULT_ENERGY_COEFF
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: NodeId,
    pub layer: Layer,
    /// CPU frequency in Hz; absent for devices.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq: Option<f64>,
    #[serde(default)]
    pub cpu_total: u64,
    #[serde(default)]
    pub cpu_avail: u64,
    #[serde(default)]
    pub ram_total: u64,
    #[serde(default)]
    pub ram_avail: u64,
    #[serde(default)]
    pub storage_total: u64,
    #[serde(default)]
    pub storage_avail: u64,
    /// Joules per cycle per Hz².
    #[serde(default = "default_energy_coeff")]
    pub energy_coeff: f64,
}

impl NodeRecord {
    pub fn device(id: impl Into<NodeId>) -> Self {
        Self {
            id: id.into(),
            layer: Layer::Device,
            freq: None,
            cpu_total: 0,
            cpu_avail: 0,
            ram_total: 0,
            ram_avail: 0,
            storage_total: 0,
            storage_avail: 0,
            energy_coeff: DEFAULT_ENERGY_COEFF,
        }
    }

    /// A compute node with all of its capacity available.
    pub fn compute(
        id: impl Into<NodeId>,
        layer: Layer,
        freq_hz: f64,
        cpu_millicores: u64,
        ram_bytes: u64,
        storage_bytes: u64,
    ) -> Self {
        Self {
            id: id.into(),
            layer,
            freq: Some(freq_hz),
            cpu_total: cpu_millicores,
            cpu_avail: cpu_millicores,
            ram_total: ram_bytes,
            ram_avail: ram_bytes,
            storage_total: storage_bytes,
            storage_avail: storage_bytes,
            energy_coeff: DEFAULT_ENERGY_COEFF,
        }
    }

    pub fn with_energy_coeff(mut self, k: f64) -> Self {
        self.energy_coeff = k;
        self
    }

    pub fn is_compute(&self) -> bool {
        self.layer.is_compute()
    }

    pub fn total(&self) -> Resources {
        Resources::new(self.cpu_total, self.ram_total, self.storage_total)
    }

    pub fn available(&self) -> Resources {
        Resources::new(self.cpu_avail, self.ram_avail, self.storage_avail)
    }

    fn set_available(&mut self, r: Resources) {
        self.cpu_avail = r.cpu;
        self.ram_avail = r.ram;
        self.storage_avail = r.storage;
    }

    /// CPU frequency of a compute node; `None` for devices.
    pub fn frequency(&self) -> Option<f64> {
        if self.is_compute() {
            self.freq
        } else {
            None
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: &str| Error::InvalidNode {
            id: self.id.clone(),
            reason: reason.to_owned(),
        };
        if self.id.as_str().is_empty() {
            return Err(invalid("empty identifier"));
        }
        if self.cpu_avail > self.cpu_total {
            return Err(invalid("cpu_avail exceeds cpu_total"));
        }
        if self.ram_avail > self.ram_total {
            return Err(invalid("ram_avail exceeds ram_total"));
        }
        if self.storage_avail > self.storage_total {
            return Err(invalid("storage_avail exceeds storage_total"));
        }
        if !self.energy_coeff.is_finite() || self.energy_coeff < 0.0 {
            return Err(invalid("energy_coeff must be finite and nonnegative"));
        }
        if self.is_compute() {
            match self.freq {
                Some(f) if f.is_finite() && f > 0.0 => {}
                _ => return Err(invalid("compute nodes need a positive finite freq")),
            }
            if self.energy_coeff <= 0.0 {
                return Err(invalid("compute nodes need a positive energy_coeff"));
            }
        } else {
            if self.total() != Resources::ZERO {
                return Err(invalid("devices have no compute capacity"));
            }
            if self.freq.is_some() {
                return Err(invalid("devices have no CPU frequency"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkRecord {
    pub src: NodeId,
    pub dst: NodeId,
    /// Seconds.
    pub latency: f64,
    /// Bytes per second.
    pub bandwidth: f64,
    #[serde(default = "default_true")]
    pub bidirectional: bool,
}

impl LinkRecord {
    pub fn new(src: impl Into<NodeId>, dst: impl Into<NodeId>, latency: f64, bandwidth: f64) -> Self {
        Self {
            src: src.into(),
            dst: dst.into(),
            latency,
            bandwidth,
            bidirectional: true,
        }
    }

    pub fn directed(mut self) -> Self {
        self.bidirectional = false;
        self
    }

    pub fn id(&self) -> LinkId {
        if self.bidirectional && self.dst < self.src {
            LinkId {
                src: self.dst.clone(),
                dst: self.src.clone(),
            }
        } else {
            LinkId {
                src: self.src.clone(),
                dst: self.dst.clone(),
            }
        }
    }

    fn carries(&self, from: &NodeId, to: &NodeId) -> bool {
        (&self.src == from && &self.dst == to)
            || (self.bidirectional && &self.src == to && &self.dst == from)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: &str| Error::InvalidLink {
            src: self.src.clone(),
            dst: self.dst.clone(),
            reason: reason.to_owned(),
        };
        if self.src == self.dst {
            return Err(invalid("self-loops are not allowed"));
        }
        if !self.latency.is_finite() || self.latency < 0.0 {
            return Err(invalid("latency must be finite and nonnegative"));
        }
        if !self.bandwidth.is_finite() || self.bandwidth <= 0.0 {
            return Err(invalid("bandwidth must be finite and positive"));
        }
        Ok(())
    }
}

/// Canonical key of a link: ordered endpoints for directed links, sorted
/// endpoints for bidirectional ones.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkId {
    pub src: NodeId,
    pub dst: NodeId,
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}--{}", self.src, self.dst)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub id: TaskId,
    /// Required CPU cycles.
    pub cycles: f64,
    /// Bytes.
    #[serde(default)]
    pub input_size: u64,
    #[serde(default)]
    pub output_size: u64,
    #[serde(default)]
    pub exe_size: u64,
    /// Milli-cores.
    #[serde(default)]
    pub req_cpu: u64,
    /// Bytes.
    #[serde(default)]
    pub req_ram: u64,
    pub source_device: NodeId,
    pub sink_node: NodeId,
}

impl TaskSpec {
    /// Footprint on the hosting node; storage is the executable size.
    pub fn requirements(&self) -> Resources {
        Resources::new(self.req_cpu, self.req_ram, self.exe_size)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: &str| Error::InvalidTask {
            id: self.id.clone(),
            reason: reason.to_owned(),
        };
        if self.id.as_str().is_empty() {
            return Err(invalid("empty identifier"));
        }
        if !self.cycles.is_finite() || self.cycles <= 0.0 {
            return Err(invalid("cycles must be finite and positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignmentEdge {
    pub task_id: TaskId,
    pub node_id: NodeId,
    pub assigned_at: f64,
}

/// How per-link bandwidths along a path are aggregated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandwidthAggregation {
    #[default]
    Mean,
    Bottleneck,
}

impl std::str::FromStr for BandwidthAggregation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "mean" => Ok(Self::Mean),
            "bottleneck" => Ok(Self::Bottleneck),
            other => Err(format!("unknown bandwidth aggregation `{other}` (mean|bottleneck)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub hops: Vec<NodeId>,
    /// Sum of link latencies, seconds.
    pub total_latency: f64,
    /// Aggregated link bandwidth, bytes/s; `+inf` for the empty path.
    #[serde(with = "crate::serde_util")]
    pub avg_bandwidth: f64,
}

/// Serializable graph state.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    #[serde(default)]
    pub nodes: Vec<NodeRecord>,
    #[serde(default)]
    pub links: Vec<LinkRecord>,
    #[serde(default)]
    pub tasks: Vec<TaskSpec>,
    #[serde(default)]
    pub assignments: Vec<AssignmentEdge>,
}

impl Snapshot {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Clone, Debug, Default)]
pub struct InfraGraph {
    nodes: BTreeMap<NodeId, NodeRecord>,
    links: BTreeMap<LinkId, LinkRecord>,
    tasks: BTreeMap<TaskId, TaskSpec>,
    assignments: BTreeMap<TaskId, AssignmentEdge>,
    bw_aggregation: BandwidthAggregation,
}

impl InfraGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bw_aggregation(&self) -> BandwidthAggregation {
        self.bw_aggregation
    }

    pub fn set_bw_aggregation(&mut self, mode: BandwidthAggregation) {
        self.bw_aggregation = mode;
    }

    // ---- nodes ----

    pub fn upsert_node(&mut self, record: NodeRecord) -> Result<NodeId> {
        record.validate()?;
        let id = record.id.clone();
        if self.nodes.contains_key(&id) {
            let hosted = self.hosted_footprint(&id);
            if hosted != Resources::ZERO {
                if !record.is_compute() {
                    return Err(Error::InvalidNode {
                        id,
                        reason: "node hosts tasks and cannot become a device".into(),
                    });
                }
                if record.available().saturating_add(&hosted) != record.total() {
                    return Err(Error::InvalidNode {
                        id,
                        reason: "available + hosted footprint must equal total".into(),
                    });
                }
            }
            let anchors_source = self.tasks.values().any(|t| t.source_device == id);
            if anchors_source && record.is_compute() {
                return Err(Error::InvalidNode {
                    id,
                    reason: "node is a task source device and must stay a device".into(),
                });
            }
        }
        self.nodes.insert(id.clone(), record);
        Ok(id)
    }

    pub fn node(&self, id: &str) -> Option<&NodeRecord> {
        self.nodes.get(id)
    }

    fn require_node(&self, id: &str) -> Result<&NodeRecord> {
        self.nodes
            .get(id)
            .ok_or_else(|| Error::UnknownNode(NodeId::from(id)))
    }

    /// All nodes in ascending id order.
    pub fn nodes(&self) -> impl Iterator<Item = &NodeRecord> {
        self.nodes.values()
    }

    pub fn compute_nodes(&self) -> impl Iterator<Item = &NodeRecord> {
        self.nodes.values().filter(|n| n.is_compute())
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    // ---- links ----

    pub fn upsert_link(&mut self, record: LinkRecord) -> Result<LinkId> {
        record.validate()?;
        for end in [&record.src, &record.dst] {
            if !self.nodes.contains_key(end) {
                return Err(Error::UnknownNode(end.clone()));
            }
        }
        // At most one record may carry any given direction.
        self.links.retain(|_, l| {
            !((record.carries(&l.src, &l.dst))
                || (l.bidirectional && record.carries(&l.dst, &l.src)))
        });
        let id = record.id();
        self.links.insert(id.clone(), record);
        Ok(id)
    }

    pub fn remove_link(&mut self, id: &LinkId) -> Option<LinkRecord> {
        self.links.remove(id)
    }

    /// Removes every link touching `node`; returns how many were dropped.
    pub fn remove_links_of(&mut self, node: &NodeId) -> usize {
        let before = self.links.len();
        self.links.retain(|_, l| &l.src != node && &l.dst != node);
        before - self.links.len()
    }

    pub fn links(&self) -> impl Iterator<Item = &LinkRecord> {
        self.links.values()
    }

    /// The link carrying traffic from `src` to `dst`, if any.
    pub fn link_between(&self, src: &NodeId, dst: &NodeId) -> Option<&LinkRecord> {
        self.links.values().find(|l| l.carries(src, dst))
    }

    // ---- tasks and assignments ----

    pub fn upsert_task(&mut self, spec: TaskSpec) -> Result<TaskId> {
        spec.validate()?;
        let source = self.require_node(spec.source_device.as_str())?;
        if source.is_compute() {
            return Err(Error::InvalidTask {
                id: spec.id.clone(),
                reason: format!("source_device `{}` is not a device", spec.source_device),
            });
        }
        self.require_node(spec.sink_node.as_str())?;
        if let (Some(old), true) = (self.tasks.get(&spec.id), self.assignments.contains_key(&spec.id)) {
            if old.requirements() != spec.requirements() {
                return Err(Error::InvalidTask {
                    id: spec.id.clone(),
                    reason: "requirements of an assigned task cannot change".into(),
                });
            }
        }
        let id = spec.id.clone();
        self.tasks.insert(id.clone(), spec);
        Ok(id)
    }

    pub fn task(&self, id: &str) -> Option<&TaskSpec> {
        self.tasks.get(id)
    }

    pub fn tasks(&self) -> impl Iterator<Item = &TaskSpec> {
        self.tasks.values()
    }

    pub fn assignment(&self, task: &str) -> Option<&AssignmentEdge> {
        self.assignments.get(task)
    }

    pub fn assignments(&self) -> impl Iterator<Item = &AssignmentEdge> {
        self.assignments.values()
    }

    pub fn is_assigned(&self, task: &str) -> bool {
        self.assignments.contains_key(task)
    }

    /// Tasks currently executing on `node`, in ascending id order.
    pub fn hosted_tasks(&self, node: &NodeId) -> Vec<TaskId> {
        self.assignments
            .values()
            .filter(|a| &a.node_id == node)
            .map(|a| a.task_id.clone())
            .collect()
    }

    pub fn hosted_footprint(&self, node: &NodeId) -> Resources {
        self.assignments
            .values()
            .filter(|a| &a.node_id == node)
            .filter_map(|a| self.tasks.get(&a.task_id))
            .fold(Resources::ZERO, |acc, t| acc.saturating_add(&t.requirements()))
    }

    fn reserve(&mut self, task: &TaskSpec, node: &NodeId) -> Result<()> {
        let record = self.require_node(node.as_str())?;
        if !record.is_compute() {
            return Err(Error::DeviceNode(node.clone()));
        }
        let req = task.requirements();
        let left = record.available().checked_sub(&req).ok_or_else(|| Error::Infeasible {
            task: task.id.clone(),
            node: node.clone(),
            reason: format!(
                "insufficient {}",
                req.shortfall(&record.available()).unwrap_or("resources")
            ),
        })?;
        self.nodes.get_mut(node).expect("checked above").set_available(left);
        Ok(())
    }

    fn unreserve(&mut self, task: &TaskSpec, node: &NodeId) -> Resources {
        let req = task.requirements();
        if let Some(record) = self.nodes.get_mut(node) {
            let total = record.total();
            let back = record.available().saturating_add(&req);
            debug_assert!(back.fits_within(&total), "release overflows node totals");
            record.set_available(Resources::new(
                back.cpu.min(total.cpu),
                back.ram.min(total.ram),
                back.storage.min(total.storage),
            ));
        }
        req
    }

    /// Creates the `EXECUTES_ON` edge and consumes the task's footprint.
    pub fn assign(&mut self, task_id: &TaskId, node: &NodeId, at: f64) -> Result<()> {
        let task = self
            .tasks
            .get(task_id)
            .cloned()
            .ok_or_else(|| Error::UnknownTask(task_id.clone()))?;
        if self.assignments.contains_key(task_id) {
            return Err(Error::TaskAlreadyAssigned(task_id.clone()));
        }
        self.reserve(&task, node)?;
        self.assignments.insert(
            task_id.clone(),
            AssignmentEdge {
                task_id: task_id.clone(),
                node_id: node.clone(),
                assigned_at: at,
            },
        );
        Ok(())
    }

    /// Moves an assigned task: the target is reserved before the source is
    /// released, so a failed reservation leaves the graph untouched.
    pub fn relocate(&mut self, task_id: &TaskId, to: &NodeId, at: f64) -> Result<NodeId> {
        let task = self
            .tasks
            .get(task_id)
            .cloned()
            .ok_or_else(|| Error::UnknownTask(task_id.clone()))?;
        let from = self
            .assignments
            .get(task_id)
            .map(|a| a.node_id.clone())
            .ok_or_else(|| Error::TaskUnassigned(task_id.clone()))?;
        if &from == to {
            return Ok(from);
        }
        self.reserve(&task, to)?;
        self.unreserve(&task, &from);
        self.assignments.insert(
            task_id.clone(),
            AssignmentEdge {
                task_id: task_id.clone(),
                node_id: to.clone(),
                assigned_at: at,
            },
        );
        Ok(from)
    }

    /// Removes the task's `EXECUTES_ON` edge and returns the freed footprint.
    pub fn release_assignment(&mut self, task_id: &TaskId) -> Result<Resources> {
        let edge = self
            .assignments
            .remove(task_id)
            .ok_or_else(|| Error::TaskUnassigned(task_id.clone()))?;
        let task = self
            .tasks
            .get(task_id)
            .cloned()
            .ok_or_else(|| Error::UnknownTask(task_id.clone()))?;
        Ok(self.unreserve(&task, &edge.node_id))
    }

    /// Describes every node whose available + hosted footprint differs from its total.
    pub fn conservation_violations(&self) -> Vec<String> {
        self.nodes
            .values()
            .filter_map(|n| {
                let sum = n.available().saturating_add(&self.hosted_footprint(&n.id));
                (sum != n.total()).then(|| {
                    format!(
                        "resource conservation broken on `{}`: avail+hosted={:?}, total={:?}",
                        n.id,
                        sum,
                        n.total()
                    )
                })
            })
            .collect()
    }

    // ---- paths ----

    pub fn topology(&self) -> Topology {
        Topology::new(self)
    }

    /// Minimum-latency path from `src` to `dst`.
    pub fn best_path(&self, src: &NodeId, dst: &NodeId) -> Result<Option<PathSummary>> {
        self.require_node(src.as_str())?;
        self.require_node(dst.as_str())?;
        let topo = self.topology();
        let s = topo.index(src).expect("node exists");
        let d = topo.index(dst).expect("node exists");
        Ok(topo.summarize(&topo.paths_from(s), d))
    }

    // ---- persistence ----

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            nodes: self.nodes.values().cloned().collect(),
            links: self.links.values().cloned().collect(),
            tasks: self.tasks.values().cloned().collect(),
            assignments: self.assignments.values().cloned().collect(),
        }
    }

    /// Rebuilds a graph from a snapshot, checking referential integrity and
    /// resource conservation.
    pub fn load(snapshot: &Snapshot) -> Result<Self> {
        let mut g = InfraGraph::new();
        for n in &snapshot.nodes {
            if g.nodes.contains_key(&n.id) {
                return Err(Error::Integrity(format!("duplicate node `{}`", n.id)));
            }
            n.validate()?;
            g.nodes.insert(n.id.clone(), n.clone());
        }
        for l in &snapshot.links {
            for end in [&l.src, &l.dst] {
                if !g.nodes.contains_key(end) {
                    return Err(Error::Integrity(format!(
                        "link {} -> {} references missing node `{}`",
                        l.src, l.dst, end
                    )));
                }
            }
            if g.links.values().any(|e| {
                l.carries(&e.src, &e.dst) || (e.bidirectional && l.carries(&e.dst, &e.src))
            }) {
                return Err(Error::Integrity(format!(
                    "duplicate link between `{}` and `{}`",
                    l.src, l.dst
                )));
            }
            g.upsert_link(l.clone())?;
        }
        for t in &snapshot.tasks {
            if g.tasks.contains_key(&t.id) {
                return Err(Error::Integrity(format!("duplicate task `{}`", t.id)));
            }
            for anchor in [&t.source_device, &t.sink_node] {
                if !g.nodes.contains_key(anchor) {
                    return Err(Error::Integrity(format!(
                        "task `{}` references missing node `{}`",
                        t.id, anchor
                    )));
                }
            }
            g.upsert_task(t.clone())?;
        }
        for a in &snapshot.assignments {
            if !g.tasks.contains_key(&a.task_id) {
                return Err(Error::Integrity(format!(
                    "assignment references missing task `{}`",
                    a.task_id
                )));
            }
            let node = g.nodes.get(&a.node_id).ok_or_else(|| {
                Error::Integrity(format!(
                    "assignment of `{}` references missing node `{}`",
                    a.task_id, a.node_id
                ))
            })?;
            if !node.is_compute() {
                return Err(Error::Integrity(format!(
                    "task `{}` is assigned to device `{}`",
                    a.task_id, a.node_id
                )));
            }
            if g.assignments.insert(a.task_id.clone(), a.clone()).is_some() {
                return Err(Error::Integrity(format!(
                    "task `{}` has more than one assignment",
                    a.task_id
                )));
            }
        }
        if let Some(v) = g.conservation_violations().into_iter().next() {
            return Err(Error::Integrity(v));
        }
        Ok(g)
    }

    pub fn to_json(&self) -> Result<String> {
        self.snapshot().to_json()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::load(&Snapshot::from_json(text)?)
    }
}

#[derive(Clone, Copy, Debug)]
struct Arc {
    to: usize,
    latency: f64,
    bandwidth: f64,
}

/// Read-only adjacency view of a graph used for path queries. Node indices
/// follow ascending id order, so comparing index sequences compares id
/// sequences lexicographically.
#[derive(Clone, Debug)]
pub struct Topology {
    ids: Vec<NodeId>,
    index: BTreeMap<NodeId, usize>,
    adj: Vec<Vec<Arc>>,
    aggregation: BandwidthAggregation,
}

/// Single-source shortest-path tree.
#[derive(Clone, Debug)]
pub struct PathTree {
    source: usize,
    latency: Vec<f64>,
    hops: Vec<usize>,
    /// Predecessor and the bandwidth of the link used to arrive.
    pred: Vec<Option<(usize, f64)>>,
}

impl PathTree {
    pub fn reaches(&self, node: usize) -> bool {
        self.latency[node].is_finite()
    }

    pub fn source(&self) -> usize {
        self.source
    }
}

#[derive(PartialEq)]
struct Frontier {
    latency: f64,
    hops: usize,
    node: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap.
        other
            .latency
            .total_cmp(&self.latency)
            .then_with(|| other.hops.cmp(&self.hops))
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Topology {
    fn new(g: &InfraGraph) -> Self {
        let ids: Vec<NodeId> = g.nodes.keys().cloned().collect();
        let index: BTreeMap<NodeId, usize> =
            ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        let mut adj = vec![Vec::new(); ids.len()];
        for l in g.links.values() {
            let (s, d) = (index[&l.src], index[&l.dst]);
            adj[s].push(Arc {
                to: d,
                latency: l.latency,
                bandwidth: l.bandwidth,
            });
            if l.bidirectional {
                adj[d].push(Arc {
                    to: s,
                    latency: l.latency,
                    bandwidth: l.bandwidth,
                });
            }
        }
        for arcs in &mut adj {
            arcs.sort_by_key(|a| a.to);
        }
        Self {
            ids,
            index,
            adj,
            aggregation: g.bw_aggregation,
        }
    }

    pub fn index(&self, id: &NodeId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, index: usize) -> &NodeId {
        &self.ids[index]
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn path_indices(pred: &[Option<(usize, f64)>], mut node: usize, source: usize) -> Vec<usize> {
        let mut path = vec![node];
        while node != source {
            node = pred[node].expect("reached nodes have predecessors").0;
            path.push(node);
        }
        path.reverse();
        path
    }

    /// Dijkstra over latencies; ties go to fewer hops, then to the
    /// lexicographically smaller node sequence.
    pub fn paths_from(&self, source: usize) -> PathTree {
        let n = self.ids.len();
        let mut latency = vec![f64::INFINITY; n];
        let mut hops = vec![usize::MAX; n];
        let mut pred: Vec<Option<(usize, f64)>> = vec![None; n];
        let mut settled = vec![false; n];
        let mut heap = BinaryHeap::new();
        latency[source] = 0.0;
        hops[source] = 0;
        heap.push(Frontier {
            latency: 0.0,
            hops: 0,
            node: source,
        });
        while let Some(Frontier { node: u, .. }) = heap.pop() {
            if settled[u] {
                continue;
            }
            settled[u] = true;
            for arc in &self.adj[u] {
                let v = arc.to;
                if settled[v] {
                    continue;
                }
                let cand_lat = latency[u] + arc.latency;
                let cand_hops = hops[u] + 1;
                let better = match cand_lat.total_cmp(&latency[v]) {
                    Ordering::Less => true,
                    Ordering::Greater => false,
                    Ordering::Equal => match cand_hops.cmp(&hops[v]) {
                        Ordering::Less => true,
                        Ordering::Greater => false,
                        Ordering::Equal => {
                            let current = pred[v].expect("tentative nodes have predecessors").0;
                            Self::path_indices(&pred, u, source)
                                < Self::path_indices(&pred, current, source)
                        }
                    },
                };
                if better {
                    latency[v] = cand_lat;
                    hops[v] = cand_hops;
                    pred[v] = Some((u, arc.bandwidth));
                    heap.push(Frontier {
                        latency: cand_lat,
                        hops: cand_hops,
                        node: v,
                    });
                }
            }
        }
        PathTree {
            source,
            latency,
            hops,
            pred,
        }
    }

    pub fn summarize(&self, tree: &PathTree, dst: usize) -> Option<PathSummary> {
        if !tree.reaches(dst) {
            return None;
        }
        let path = Self::path_indices(&tree.pred, dst, tree.source);
        let bandwidths: Vec<f64> = path[1..]
            .iter()
            .map(|&v| tree.pred[v].expect("path nodes have predecessors").1)
            .collect();
        let avg_bandwidth = aggregate_bandwidth(&bandwidths, self.aggregation);
        debug_assert_eq!(tree.hops[dst], bandwidths.len());
        Some(PathSummary {
            hops: path.into_iter().map(|i| self.ids[i].clone()).collect(),
            total_latency: tree.latency[dst],
            avg_bandwidth,
        })
    }
}

/// Aggregates link bandwidths in path order; the empty path is unbounded.
pub fn aggregate_bandwidth(bandwidths: &[f64], mode: BandwidthAggregation) -> f64 {
    if bandwidths.is_empty() {
        return f64::INFINITY;
    }
    match mode {
        BandwidthAggregation::Mean => bandwidths.iter().sum::<f64>() / bandwidths.len() as f64,
        BandwidthAggregation::Bottleneck => bandwidths.iter().copied().fold(f64::INFINITY, f64::min),
    }
}
