//! Mobile agents: patrol walkers that spread congestion state through
//! routing tables, and probe clones that measure candidate paths end to end.
//!
//! Agents are protocol messages with state — a migration is a control frame
//! carrying the agent value across one link through the real queues.

pub mod patrol;
pub mod probe;
pub mod routing;

use serde::{Deserialize, Serialize};

use crate::net::{CongestionReport, NodeId};
use crate::time::SimTime;

pub use patrol::{patrol_step, propagate_congestion, update_routing_table, PatrolError};
pub use probe::{
    initiate_reroute, install_path, measure_path_rate, probe_advance, select_path, InstallError,
    ProbeContext, ProbeError, ProbeResult, ProbeStep, RerouteError, RerouteRequest,
};
pub use routing::{RouteEntry, RoutingTable};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct AgentId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentMode {
    Patrol,
    Probe,
}

/// One stop on an agent's walk: where, when, and what it saw there.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry {
    pub node: NodeId,
    pub arrived_at: SimTime,
    pub observed: CongestionReport,
}

/// A patrol or probe automaton. The value itself is what travels.
#[derive(Debug, Clone)]
pub struct MobileAgent {
    pub agent_id: AgentId,
    pub mode: AgentMode,
    pub home: NodeId,
    pub location: NodeId,
    pub history: Vec<HistoryEntry>,
    /// Parent agent id, set iff this agent was cloned.
    pub lineage: Option<AgentId>,
    /// Probe agents always carry one; patrol agents never do.
    pub probe_ctx: Option<ProbeContext>,
}

impl MobileAgent {
    pub fn patrol(agent_id: AgentId, home: NodeId) -> MobileAgent {
        MobileAgent {
            agent_id,
            mode: AgentMode::Patrol,
            home,
            location: home,
            history: Vec::new(),
            lineage: None,
            probe_ctx: None,
        }
    }

    /// Record arrival at `node`, keeping at most `history_cap` entries.
    pub fn record_arrival(
        &mut self,
        node: NodeId,
        arrived_at: SimTime,
        observed: CongestionReport,
        history_cap: usize,
    ) {
        debug_assert!(
            self.history
                .last()
                .map(|h| h.arrived_at < arrived_at)
                .unwrap_or(true),
            "history must be strictly increasing in time"
        );
        debug_assert!(observed.measured_at <= arrived_at, "observation from the future");
        self.location = node;
        self.history.push(HistoryEntry {
            node,
            arrived_at,
            observed,
        });
        if self.history.len() > history_cap {
            let excess = self.history.len() - history_cap;
            self.history.drain(..excess);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::CongestionReport;

    #[test]
    fn history_is_capped_and_ordered() {
        let mut agent = MobileAgent::patrol(AgentId(1), NodeId(0));
        for t in 1..=10u64 {
            agent.record_arrival(
                NodeId(t as u32 % 3),
                SimTime(t),
                CongestionReport::idle(SimTime(t)),
                4,
            );
        }
        assert_eq!(agent.history.len(), 4);
        assert!(agent
            .history
            .windows(2)
            .all(|w| w[0].arrived_at < w[1].arrived_at));
        assert_eq!(agent.history.last().unwrap().arrived_at, SimTime(10));
    }
}
