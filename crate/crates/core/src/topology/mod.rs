//! Transport network and its congestion-aware time-space expansion.

mod network;
mod tsn;

pub use network::{NodeId, PhysicalArc, ScheduleNodes, TransportNetwork};
pub use tsn::{
    ArcFlags, AugNodeId, AugNodeKind, FlowPair, NodeLabel, TimeSpaceNetwork, TsnArc, TsnConfig,
};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TopologyError {
    #[error("network has no nodes")]
    EmptyNetwork,
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} declared twice")]
    DuplicateNode(NodeId),
    #[error("arc {0} -> {1} declared twice")]
    DuplicateArc(NodeId, NodeId),
    #[error("self-loop at node {0}; stationary arcs are implicit")]
    SelfLoop(NodeId),
    #[error("arc {0} -> {1} has zero duration")]
    ZeroDuration(NodeId, NodeId),
    #[error("need at least 2 timesteps, got {0}")]
    TooFewTimesteps(usize),
    #[error("congestion delay must be at least one timespan")]
    ZeroCongestionDelay,
    #[error("unknown augmented node index {0}")]
    UnknownAugNode(usize),
    #[error("network file: {0}")]
    Parse(String),
}
