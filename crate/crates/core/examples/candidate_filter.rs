//! Candidate lists for the four services on an empty testbed, then again
//! once the deployed services have used up part of the capacity.

use edgeorch::{filter_candidates, fixtures, CandidateMap};

fn show(title: &str, map: &CandidateMap) {
    println!("{title}");
    for (task, entries) in map.iter() {
        let nodes: Vec<String> = entries
            .iter()
            .map(|e| format!("{} (in {:.0} ms, out {:.0} ms)", e.node_id, e.lat_in * 1e3, e.lat_out * 1e3))
            .collect();
        println!("  {:<26} {}", task.as_str(), if nodes.is_empty() { "-".into() } else { nodes.join(", ") });
    }
    println!("  mean list size {:.2}", map.mean_size());
}

fn main() -> edgeorch::Result<()> {
    let services = fixtures::testbed_services();
    let empty = fixtures::testbed_graph();
    show("empty testbed", &filter_candidates(&empty, &services)?);

    // A second copy of each service, filtered against the deployed testbed.
    let deployed = fixtures::deployed_testbed();
    let copies: Vec<_> = services
        .iter()
        .map(|t| edgeorch::TaskSpec {
            id: format!("{}-2", t.id).into(),
            ..t.clone()
        })
        .collect();
    show("deployed testbed, second replicas", &filter_candidates(&deployed, &copies)?);
    Ok(())
}
