//! Plans a generated 500-node, 200-task topology and reports how far the
//! filter narrows each task's choices.

use std::time::Instant;

use edgeorch::cli::plan_report;
use edgeorch::{generate_synthetic, GeneratorSpec};

fn main() -> edgeorch::Result<()> {
    let spec = GeneratorSpec {
        devices: 200,
        edge: 240,
        fog: 50,
        cloud: 10,
        tasks: 200,
    };
    let scenario = generate_synthetic(&spec, 42)?;
    let t0 = Instant::now();
    let report = plan_report(&scenario, false)?;
    let took = t0.elapsed();

    let min = report.candidate_sizes.values().min().copied().unwrap_or(0);
    let max = report.candidate_sizes.values().max().copied().unwrap_or(0);
    println!("{} nodes, {} compute, {} tasks", spec.total_nodes(), report.compute_nodes, spec.tasks);
    println!("candidates per task: mean {:.1}, min {min}, max {max}", report.mean_candidates);
    println!(
        "assigned {}/{} (ratio {:.3}), mean cost {:?}",
        report.plan.assigned_count,
        spec.tasks,
        report.assignment_ratio,
        report.plan.mean_cost
    );
    println!("filter + optimize: {took:.2?}");
    Ok(())
}
