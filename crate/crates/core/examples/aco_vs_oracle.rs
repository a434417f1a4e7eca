//! Colony search against the exhaustive optimum on a small generated
//! instance, with the incumbent trace.

use edgeorch::{filter_candidates, generate_synthetic, AcoParams, Colony, GeneratorSpec, Layer, TaskSpec};

fn main() -> edgeorch::Result<()> {
    let spec = GeneratorSpec {
        devices: 3,
        edge: 3,
        fog: 2,
        cloud: 1,
        tasks: 6,
    };
    let scenario = generate_synthetic(&spec, 11)?;
    let graph = scenario.graph()?;
    let cands = filter_candidates(&graph, &scenario.tasks)?;
    let colony = Colony::new(&graph, &scenario.tasks, &cands, &scenario.weights)?;
    println!("{} tasks, search space {} mappings", colony.task_count(), colony.search_space());

    let params = AcoParams {
        n_iters: 60,
        seed: 11,
        ..Default::default()
    };
    let out = colony.optimize(&params)?;
    let mut last = None;
    for rec in &out.trace {
        if Some((rec.assigned, rec.mean_cost)) != last {
            println!("  iter {:>3}: assigned {} mean {:?}", rec.iteration, rec.assigned, rec.mean_cost);
            last = Some((rec.assigned, rec.mean_cost));
        }
    }
    let best = colony.brute_force()?;
    for (task, p) in &out.plan.assignments {
        let opt = best.node_of(task.as_str()).map_or("-", |n| n.as_str());
        println!("  {:<8} colony {:<8} oracle {}", task.as_str(), p.node_id.as_str(), opt);
    }
    println!("colony mean {:?}, oracle mean {:?}", out.plan.mean_cost, best.mean_cost);
    println!(
        "pheromones in [{:.3}, {:.3}], normalization error {:.1e}",
        out.diagnostics.pheromone_min, out.diagnostics.pheromone_max, out.diagnostics.max_normalization_error
    );

    // Deliver every output to the cloud node itself. Its output path becomes
    // empty, its heuristic hits the cap, and the colony rarely looks elsewhere
    // even when the cost says it should.
    let cloud = graph.nodes().find(|n| n.layer == Layer::Cloud).expect("one cloud").id.clone();
    let tasks: Vec<TaskSpec> = scenario
        .tasks
        .iter()
        .map(|t| TaskSpec {
            sink_node: cloud.clone(),
            ..t.clone()
        })
        .collect();
    let cands = filter_candidates(&graph, &tasks)?;
    let colony = Colony::new(&graph, &tasks, &cands, &scenario.weights)?;
    let out = colony.optimize(&params)?;
    let best = colony.brute_force()?;
    println!(
        "sinks on {cloud}: colony mean {:?}, oracle mean {:?}",
        out.plan.mean_cost, best.mean_cost
    );
    Ok(())
}
