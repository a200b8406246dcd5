//! Simulated compute cluster: nodes, machine-config pools, profiles, NIC
//! virtual functions, PTP health and failures.

mod cpuset;
mod node;
mod profile;
mod seed;
mod sim;

pub use cpuset::CoreSet;
pub use node::{Arch, GpuSlot, GpuSpec, NicSpec, Node, NodeSpec, NodeState, VfAllocation, VfHandle, VfPool, VfRequest};
pub use profile::{PerformanceProfile, ProfileBundle, PtpProfile, PtpServo, SriovPolicy, SyncState};
pub use seed::{ClusterSeed, SeedNode, SEED_CLUSTER};
pub use sim::{Actor, ClusterSim, Event, FiredEvent, LoadEvent, LoadKind, LogEntry, SimClock, SimConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClusterError {
    #[error("unknown pool `{0}`")]
    UnknownPool(String),
    #[error("node `{0}` already exists")]
    DuplicateNode(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{node}` has no NIC `{nic}`")]
    UnknownNic { node: String, nic: String },
    #[error("no free virtual function on {node}/{nic}")]
    VfExhausted { node: String, nic: String },
    #[error("node `{node}` is {state}")]
    NodeNotReady { node: String, state: NodeState },
    #[error("node `{0}` has failed")]
    NodeFailed(String),
    #[error("virtual function {0} is not allocated")]
    UnknownVf(VfHandle),
    #[error("node `{node}` has {free} free isolated cores, {requested} requested")]
    InsufficientCores { node: String, requested: u32, free: u32 },
    #[error("node `{0}` has no free GPU partition")]
    NoGpuSlot(String),
    #[error("pool `{pool}`: {message}")]
    InvalidProfile { pool: String, message: String },
    #[error("cluster seed: {0}")]
    Seed(String),
}
