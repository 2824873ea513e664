//! The simulated world: multi-rate topology, per-class queues, congestion
//! levels, and path analysis.

pub mod node;
pub mod path;
pub mod topology;

pub use node::{
    congestion_level, node_priority, ClassQueues, CongestionLevel, CongestionReport, DomainError,
    LevelThresholds, TrafficClass, Transition,
};
pub use path::{bottleneck_rate, detect_mismatch, PathError};
pub use topology::{Link, LinkAction, LinkEvent, NodeId, Topology, TopologyError};
