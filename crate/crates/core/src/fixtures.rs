//! Canonical testbed: one cloud server, three edge nodes, the IoT devices
//! feeding them, and the four energy services deployed on top.
//!
//! Memory and storage sizes written as MB/GB are binary (MiB/GiB). Service
//! outputs are delivered to the operator's control center, an endpoint
//! behind the cloud server.

use crate::graph::{InfraGraph, Layer, LinkRecord, NodeRecord, TaskSpec, GIB, KIB, MIB};
use crate::sim::{EventKind, Scenario, SimEvent};

pub const CLOUD: &str = "cloud";
pub const EDGE_1: &str = "edge-1";
pub const EDGE_2: &str = "edge-2";
pub const EDGE_3: &str = "edge-3";

pub const SMART_METER: &str = "smart-meter";
pub const WEATHER_STATION: &str = "weather-station";
pub const PV_INVERTER: &str = "pv-inverter";
pub const CONTROL_CENTER: &str = "control-center";

pub const LOAD_FORECASTING: &str = "load-forecasting";
pub const ENERGY_BALANCER: &str = "energy-balancer";
pub const PHOTOVOLTAIC_MANAGER: &str = "photovoltaic-manager";
pub const GREEN_ENERGY_FORECASTING: &str = "green-energy-forecasting";

/// 4 Mb/s uplink between every edge node and the cloud.
pub const UPLINK_BANDWIDTH: f64 = 5.0e5;
pub const UPLINK_LATENCY: f64 = 0.010;
/// Gigabit-class LAN between edge nodes.
pub const LAN_BANDWIDTH: f64 = 12.5e6;
pub const LAN_LATENCY: f64 = 0.002;
pub const FIELD_BANDWIDTH: f64 = 1.25e6;
pub const FIELD_LATENCY: f64 = 0.001;
pub const CONTROL_BANDWIDTH: f64 = 1.25e7;
pub const CONTROL_LATENCY: f64 = 0.001;

/// Time of the CPU pressure event in the migration scenario.
pub const PRESSURE_AT: f64 = 30.0;

/// The four compute nodes of the testbed.
pub fn testbed_nodes() -> Vec<NodeRecord> {
    vec![
        NodeRecord::compute(CLOUD, Layer::Cloud, 3.0e9, 4000, 16 * GIB, 256 * GIB),
        NodeRecord::compute(EDGE_1, Layer::Edge, 2.4e9, 2000, 8 * GIB, 64 * GIB),
        NodeRecord::compute(EDGE_2, Layer::Edge, 2.2e9, 2000, 6 * GIB, 64 * GIB),
        NodeRecord::compute(EDGE_3, Layer::Edge, 2.2e9, 2000, 8 * GIB, 64 * GIB),
    ]
}

/// Testbed nodes, field devices and links; no tasks.
pub fn testbed_graph() -> InfraGraph {
    let mut g = InfraGraph::new();
    for n in testbed_nodes() {
        g.upsert_node(n).expect("valid fixture node");
    }
    for d in [SMART_METER, WEATHER_STATION, PV_INVERTER, CONTROL_CENTER] {
        g.upsert_node(NodeRecord::device(d)).expect("valid fixture device");
    }
    let edges = [EDGE_1, EDGE_2, EDGE_3];
    let mut links = Vec::new();
    for e in edges {
        links.push(LinkRecord::new(e, CLOUD, UPLINK_LATENCY, UPLINK_BANDWIDTH));
    }
    for (i, a) in edges.iter().enumerate() {
        for b in &edges[i + 1..] {
            links.push(LinkRecord::new(*a, *b, LAN_LATENCY, LAN_BANDWIDTH));
        }
    }
    links.push(LinkRecord::new(SMART_METER, EDGE_1, FIELD_LATENCY, FIELD_BANDWIDTH));
    links.push(LinkRecord::new(PV_INVERTER, EDGE_2, FIELD_LATENCY, FIELD_BANDWIDTH));
    links.push(LinkRecord::new(WEATHER_STATION, EDGE_3, FIELD_LATENCY, FIELD_BANDWIDTH));
    links.push(LinkRecord::new(CONTROL_CENTER, CLOUD, CONTROL_LATENCY, CONTROL_BANDWIDTH));
    for l in links {
        g.upsert_link(l).expect("valid fixture link");
    }
    g
}

/// 1236 ms on the 2.4 GHz edge CPU, 37.8% of one core, 20.5 MB of RAM and a
/// 20 KB/s input stream.
pub fn load_forecasting_task() -> TaskSpec {
    TaskSpec {
        id: LOAD_FORECASTING.into(),
        cycles: 1.236 * 2.4e9,
        input_size: 20 * KIB,
        output_size: 2 * KIB,
        exe_size: 25_000_000,
        req_cpu: 378,
        req_ram: 41 * MIB / 2,
        source_device: SMART_METER.into(),
        sink_node: CONTROL_CENTER.into(),
    }
}

pub fn energy_balancer_task() -> TaskSpec {
    TaskSpec {
        id: ENERGY_BALANCER.into(),
        cycles: 2.0e9,
        input_size: 64 * KIB,
        output_size: 8 * KIB,
        exe_size: 40_000_000,
        req_cpu: 1000,
        req_ram: 2 * GIB,
        source_device: SMART_METER.into(),
        sink_node: CONTROL_CENTER.into(),
    }
}

pub fn photovoltaic_manager_task() -> TaskSpec {
    TaskSpec {
        id: PHOTOVOLTAIC_MANAGER.into(),
        cycles: 1.0e9,
        input_size: 32 * KIB,
        output_size: 4 * KIB,
        exe_size: 20_000_000,
        req_cpu: 500,
        req_ram: 5 * GIB,
        source_device: PV_INVERTER.into(),
        sink_node: CONTROL_CENTER.into(),
    }
}

/// Image of 3.0e7 bytes: a 60 s pull over the 4 Mb/s uplink.
pub fn green_energy_forecasting_task() -> TaskSpec {
    TaskSpec {
        id: GREEN_ENERGY_FORECASTING.into(),
        cycles: 6.0e9,
        input_size: 4_000_000,
        output_size: 100_000,
        exe_size: 30_000_000,
        req_cpu: 1200,
        req_ram: 2 * GIB,
        source_device: WEATHER_STATION.into(),
        sink_node: CONTROL_CENTER.into(),
    }
}

pub fn testbed_services() -> Vec<TaskSpec> {
    vec![
        load_forecasting_task(),
        energy_balancer_task(),
        photovoltaic_manager_task(),
        green_energy_forecasting_task(),
    ]
}

/// Where each service runs before the pressure event.
pub fn initial_placement() -> Vec<(&'static str, &'static str)> {
    vec![
        (LOAD_FORECASTING, EDGE_1),
        (ENERGY_BALANCER, CLOUD),
        (PHOTOVOLTAIC_MANAGER, EDGE_2),
        (GREEN_ENERGY_FORECASTING, EDGE_3),
    ]
}

/// Testbed graph with the four services deployed per `initial_placement`.
pub fn deployed_testbed() -> InfraGraph {
    let mut g = testbed_graph();
    for t in testbed_services() {
        g.upsert_task(t).expect("valid fixture task");
    }
    for (task, node) in initial_placement() {
        g.assign(&task.into(), &node.into(), 0.0).expect("fixture placement fits");
    }
    g
}

/// Testbed with only the load-forecasting task, unassigned.
pub fn testbed_scenario() -> Scenario {
    let mut g = testbed_graph();
    g.upsert_task(load_forecasting_task()).expect("valid fixture task");
    Scenario::from_graph(&g)
}

/// Deployed testbed plus a CPU pressure spike on edge-3.
pub fn migration_scenario() -> Scenario {
    let mut s = Scenario::from_graph(&deployed_testbed());
    s.events.push(SimEvent {
        at: PRESSURE_AT,
        kind: EventKind::CpuPressure {
            node: EDGE_3.into(),
            load_fraction: 0.97,
        },
    });
    s
}
