use crate::graph::{NodeId, TaskId};
use crate::ledger::LedgerError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),

    #[error("unknown task `{0}`")]
    UnknownTask(TaskId),

    #[error("invalid node `{id}`: {reason}")]
    InvalidNode { id: NodeId, reason: String },

    #[error("invalid link {src} -> {dst}: {reason}")]
    InvalidLink {
        src: NodeId,
        dst: NodeId,
        reason: String,
    },

    #[error("invalid task `{id}`: {reason}")]
    InvalidTask { id: TaskId, reason: String },

    #[error("task `{0}` is not assigned")]
    TaskUnassigned(TaskId),

    #[error("task `{0}` is already assigned")]
    TaskAlreadyAssigned(TaskId),

    #[error("node `{node}` cannot host task `{task}`: {reason}")]
    Infeasible {
        task: TaskId,
        node: NodeId,
        reason: String,
    },

    #[error("node `{0}` is a device and has no compute capacity")]
    DeviceNode(NodeId),

    #[error("invalid cost weights: {0}")]
    InvalidWeights(String),

    #[error("invalid ACO parameters: {0}")]
    InvalidParams(String),

    #[error("instance too large for exhaustive search: {size} mappings exceed the limit of {limit}")]
    InstanceTooLarge { size: f64, limit: u64 },

    #[error("snapshot integrity violation: {0}")]
    Integrity(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("plan rejected: {0}")]
    PlanRejected(String),

    #[error("invalid generator spec: {0}")]
    Generator(String),

    #[error(transparent)]
    Ledger(#[from] LedgerError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
