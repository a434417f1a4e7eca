//! Lowest-latency paths on the testbed under both bandwidth aggregations.

use edgeorch::{fixtures, BandwidthAggregation, NodeId};

fn main() -> edgeorch::Result<()> {
    let mut g = fixtures::testbed_graph();
    let pairs = [
        (fixtures::SMART_METER, fixtures::EDGE_3),
        (fixtures::WEATHER_STATION, fixtures::CLOUD),
        (fixtures::EDGE_1, fixtures::CONTROL_CENTER),
        (fixtures::PV_INVERTER, fixtures::CONTROL_CENTER),
    ];
    for mode in [BandwidthAggregation::Mean, BandwidthAggregation::Bottleneck] {
        g.set_bw_aggregation(mode);
        println!("bandwidth aggregation: {mode:?}");
        for (a, b) in pairs {
            let (a, b) = (NodeId::from(a), NodeId::from(b));
            match g.best_path(&a, &b)? {
                Some(p) => {
                    let hops: Vec<&str> = p.hops.iter().map(NodeId::as_str).collect();
                    println!(
                        "  {:<28} {:>7.3} ms {:>12.0} B/s",
                        hops.join(" > "),
                        p.total_latency * 1e3,
                        p.avg_bandwidth
                    );
                }
                None => println!("  {a} cannot reach {b}"),
            }
        }
    }
    Ok(())
}
