//! Per-candidate cost breakdown for green energy forecasting, raw and
//! min-max normalized, and the effect of shifting weight onto energy.

use edgeorch::{filter_candidates, fixtures, pair_cost, CostBreakdown, CostWeights};

fn main() -> edgeorch::Result<()> {
    let g = fixtures::testbed_graph();
    let task = fixtures::green_energy_forecasting_task();
    let cands = filter_candidates(&g, std::slice::from_ref(&task))?;
    let entries = cands.get(task.id.as_str()).unwrap_or_default();

    for (label, weights) in [
        ("balanced", CostWeights::default()),
        ("energy-heavy", CostWeights::new(1.0, 1.0, 10.0)?),
    ] {
        let mut rows: Vec<(String, CostBreakdown)> = Vec::new();
        for e in entries {
            let node = g.node(e.node_id.as_str()).expect("candidate exists");
            rows.push((e.node_id.to_string(), pair_cost(&task, node, e, &weights)?));
        }
        let mut normalized: Vec<CostBreakdown> = rows.iter().map(|r| r.1).collect();
        edgeorch::cost::normalize_components(&mut normalized, &weights);

        println!("{label} weights");
        println!("  {:<8} {:>9} {:>9} {:>9} {:>9} {:>11}", "node", "exec s", "comm s", "energy J", "total", "normalized");
        for ((node, c), n) in rows.iter().zip(&normalized) {
            println!(
                "  {:<8} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>11.4}",
                node, c.exec, c.comm, c.energy, c.total, n.total
            );
        }
        let best = rows.iter().min_by(|a, b| a.1.total.total_cmp(&b.1.total)).map(|r| r.0.as_str());
        println!("  cheapest: {}", best.unwrap_or("-"));
    }
    Ok(())
}
