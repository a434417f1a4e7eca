//! The four-service testbed under a CPU spike on edge-3: the forecasting
//! service moves without downtime and its token follows it.

use edgeorch::sim::LogKind;
use edgeorch::{fixtures, run};

fn main() -> edgeorch::Result<()> {
    let report = run(&fixtures::migration_scenario())?;

    for e in &report.event_log {
        let line = match &e.entry {
            LogKind::Alert { node, load } => format!("alert on {node} at load {load:.2}"),
            LogKind::Planned { tasks, excluded, assigned, mean_cost, .. } => format!(
                "re-planned {} task(s) excluding {:?}: {assigned} placed, mean cost {:?}",
                tasks.len(),
                excluded.iter().map(|n| n.as_str()).collect::<Vec<_>>(),
                mean_cost
            ),
            LogKind::Migrated { task, from, to } => format!("{task}: {from} -> {to}"),
            LogKind::Released { task, node } => format!("{task} released from {node}"),
            _ => continue,
        };
        println!("t={:>5.1}  {line}", e.at);
    }
    for m in &report.migrations {
        println!(
            "{} pulled its image in {:.1} s at {:.0} B/s, downtime {} s",
            m.task_id, m.image_pull_duration, m.bandwidth_peak, m.downtime
        );
    }
    let summary = edgeorch::cli::ledger_summary(&report);
    println!(
        "ledger: {} mints, {} transfers, gas {}",
        summary.mints, summary.transfers, summary.gas_total
    );
    for t in summary.live_tokens.iter().filter(|t| t.history.len() > 2) {
        let hist: Vec<&str> = t.history.iter().map(|a| a.as_str()).collect();
        println!("  {} {}", t.task, hist.join(" -> "));
    }
    Ok(())
}
