//! Graph-driven task offloading for edge-fog-cloud infrastructures.
//!
//! The pieces compose in one direction:
//!
//! * [`graph`] holds nodes, links, tasks and placements and answers path queries.
//! * [`filter`] reduces each unassigned task to the nodes that can reach its
//!   data, deliver its output and fit its footprint.
//! * [`cost`] scores a (task, node) pair by execution time, transfer time and energy.
//! * [`aco`] searches for a placement with an ant colony, with an exhaustive
//!   oracle for small instances.
//! * [`sim`] replays timed events, re-plans under CPU pressure or failure and
//!   migrates tasks without downtime.
//! * [`ledger`] tracks every placement as a token with gas accounting.
//!
//! ```
//! use edgeorch::{fixtures, filter_candidates, optimize, AcoParams, CostWeights};
//!
//! let graph = fixtures::testbed_graph();
//! let tasks = vec![fixtures::load_forecasting_task()];
//! let candidates = filter_candidates(&graph, &tasks).unwrap();
//! let out = optimize(&graph, &tasks, &candidates, &CostWeights::default(), &AcoParams::default()).unwrap();
//! assert_eq!(out.plan.assigned_count, 1);
//! ```

pub mod aco;
pub mod cli;
pub mod cost;
pub mod error;
pub mod filter;
pub mod fixtures;
pub mod graph;
pub mod ledger;
pub mod serde_util;
pub mod sim;

pub use aco::{brute_force, heuristic_value, optimize, AcoParams, Colony, PlacementPlan, PlanRank};
pub use cost::{pair_cost, plan_cost, CostBreakdown, CostWeights};
pub use error::{Error, Result};
pub use filter::{filter_candidates, refresh_entry, CandidateEntry, CandidateMap};
pub use graph::{
    BandwidthAggregation, InfraGraph, Layer, LinkRecord, NodeId, NodeRecord, PathSummary, Snapshot, TaskId, TaskSpec,
};
pub use ledger::{Account, Ledger, LedgerError, TokenFields, TokenId};
pub use sim::{apply_plan, generate_synthetic, run, GeneratorSpec, MigrationRecord, Scenario, SimEvent, SimReport};
