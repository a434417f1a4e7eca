#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use edgeorch::graph::{Resources, GIB, MIB};
use edgeorch::{InfraGraph, Layer, LinkRecord, NodeId, NodeRecord, TaskSpec};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub graph: InfraGraph,
    pub tasks: Vec<TaskSpec>,
}

pub struct Shape {
    pub compute: (usize, usize),
    pub devices: (usize, usize),
    pub tasks: (usize, usize),
    pub extra_link_prob: f64,
    pub one_way_prob: f64,
    /// Chance that a compute node is left out of the spanning tree.
    pub isolate_prob: f64,
    /// Let task outputs land on compute nodes as well as on devices.
    pub compute_sinks: bool,
}

pub const SMALL: Shape = Shape {
    compute: (2, 6),
    devices: (1, 3),
    tasks: (1, 6),
    extra_link_prob: 0.3,
    one_way_prob: 0.0,
    isolate_prob: 0.0,
    compute_sinks: false,
};

/// Like `SMALL`, but a sink may be a compute node, which makes that node's
/// heuristic hit the cap.
pub const SMALL_COLOCATED: Shape = Shape {
    compute_sinks: true,
    ..SMALL
};

pub const MEDIUM: Shape = Shape {
    compute: (5, 40),
    devices: (1, 10),
    tasks: (1, 20),
    extra_link_prob: 0.05,
    one_way_prob: 0.2,
    isolate_prob: 0.1,
    compute_sinks: true,
};

/// Random layered-ish graph with tasks anchored on random devices and sinks.
pub fn random_instance(seed: u64, shape: &Shape) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = InfraGraph::new();
    let nc = rng.gen_range(shape.compute.0..=shape.compute.1);
    let nd = rng.gen_range(shape.devices.0..=shape.devices.1);
    let layers = [Layer::Edge, Layer::Fog, Layer::Cloud];
    let compute: Vec<NodeId> = (0..nc).map(|i| NodeId::new(format!("n{i:02}"))).collect();
    let devices: Vec<NodeId> = (0..nd).map(|i| NodeId::new(format!("d{i:02}"))).collect();
    for id in &compute {
        let layer = *layers.choose(&mut rng).unwrap();
        g.upsert_node(NodeRecord::compute(
            id.clone(),
            layer,
            rng.gen_range(1.5e9..3.5e9),
            rng.gen_range(1000..=4000),
            rng.gen_range(2..=8) * GIB,
            rng.gen_range(16..=64) * GIB,
        ))
        .unwrap();
    }
    for id in &devices {
        g.upsert_node(NodeRecord::device(id.clone())).unwrap();
    }
    let link = |g: &mut InfraGraph, rng: &mut ChaCha8Rng, a: &NodeId, b: &NodeId| {
        if a == b || g.link_between(a, b).is_some() || g.link_between(b, a).is_some() {
            return;
        }
        let mut l = LinkRecord::new(a.clone(), b.clone(), rng.gen_range(0.001..0.020), rng.gen_range(1e5..1e7));
        if rng.gen_bool(shape.one_way_prob) {
            l = l.directed();
        }
        g.upsert_link(l).unwrap();
    };
    for i in 1..nc {
        if rng.gen_bool(shape.isolate_prob) {
            continue;
        }
        let j = rng.gen_range(0..i);
        link(&mut g, &mut rng, &compute[i], &compute[j]);
    }
    for i in 0..nc {
        for j in i + 1..nc {
            if rng.gen_bool(shape.extra_link_prob) {
                link(&mut g, &mut rng, &compute[i], &compute[j]);
            }
        }
    }
    for d in &devices {
        let k = rng.gen_range(1..=2.min(nc));
        for c in compute.choose_multiple(&mut rng, k) {
            link(&mut g, &mut rng, d, c);
        }
    }
    let sinks: Vec<NodeId> = if shape.compute_sinks {
        compute.iter().chain(&devices).cloned().collect()
    } else {
        devices.clone()
    };
    let nt = rng.gen_range(shape.tasks.0..=shape.tasks.1);
    let tasks = (0..nt)
        .map(|i| TaskSpec {
            id: format!("t{i:02}").into(),
            cycles: rng.gen_range(5e8..5e9),
            input_size: rng.gen_range(1_000..2_000_000),
            output_size: rng.gen_range(1_000..500_000),
            exe_size: rng.gen_range(10..=100) * MIB,
            req_cpu: rng.gen_range(200..=1500),
            req_ram: rng.gen_range(256..=3072) * MIB,
            source_device: devices.choose(&mut rng).unwrap().clone(),
            sink_node: sinks.choose(&mut rng).unwrap().clone(),
        })
        .collect();
    Instance { graph: g, tasks }
}

fn directed_adjacency(g: &InfraGraph) -> BTreeMap<NodeId, Vec<NodeId>> {
    let mut adj: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for l in g.links() {
        adj.entry(l.src.clone()).or_default().push(l.dst.clone());
        if l.bidirectional {
            adj.entry(l.dst.clone()).or_default().push(l.src.clone());
        }
    }
    adj
}

fn reachable(adj: &BTreeMap<NodeId, Vec<NodeId>>, from: &NodeId) -> BTreeSet<NodeId> {
    let mut seen = BTreeSet::from([from.clone()]);
    let mut queue = VecDeque::from([from.clone()]);
    while let Some(n) = queue.pop_front() {
        for m in adj.get(&n).into_iter().flatten() {
            if seen.insert(m.clone()) {
                queue.push_back(m.clone());
            }
        }
    }
    seen
}

/// Enumerate-and-check candidate sets: every compute node with room for the
/// task that the source reaches and that reaches the sink.
pub fn naive_candidates(g: &InfraGraph, tasks: &[TaskSpec]) -> BTreeMap<String, BTreeSet<String>> {
    let adj = directed_adjacency(g);
    let mut out = BTreeMap::new();
    for t in tasks.iter().filter(|t| !g.is_assigned(t.id.as_str())) {
        let from_source = reachable(&adj, &t.source_device);
        let req = Resources::new(t.req_cpu, t.req_ram, t.exe_size);
        let set = g
            .compute_nodes()
            .filter(|n| {
                n.cpu_avail >= req.cpu
                    && n.ram_avail >= req.ram
                    && n.storage_avail >= req.storage
                    && from_source.contains(&n.id)
                    && reachable(&adj, &n.id).contains(&t.sink_node)
            })
            .map(|n| n.id.to_string())
            .collect();
        out.insert(t.id.to_string(), set);
    }
    out
}

/// Minimum total latency over all simple paths, by exhaustive DFS.
pub fn exhaustive_latency(g: &InfraGraph, src: &NodeId, dst: &NodeId) -> Option<f64> {
    let mut adj: BTreeMap<NodeId, Vec<(NodeId, f64)>> = BTreeMap::new();
    for l in g.links() {
        adj.entry(l.src.clone()).or_default().push((l.dst.clone(), l.latency));
        if l.bidirectional {
            adj.entry(l.dst.clone()).or_default().push((l.src.clone(), l.latency));
        }
    }
    fn dfs(
        adj: &BTreeMap<NodeId, Vec<(NodeId, f64)>>,
        at: &NodeId,
        dst: &NodeId,
        lat: f64,
        seen: &mut BTreeSet<NodeId>,
        best: &mut Option<f64>,
    ) {
        if at == dst {
            *best = Some(best.map_or(lat, |b: f64| b.min(lat)));
            return;
        }
        for (next, l) in adj.get(at).into_iter().flatten() {
            if seen.insert(next.clone()) {
                dfs(adj, next, dst, lat + l, seen, best);
                seen.remove(next);
            }
        }
    }
    let mut best = None;
    let mut seen = BTreeSet::from([src.clone()]);
    dfs(&adj, src, dst, 0.0, &mut seen, &mut best);
    best
}
