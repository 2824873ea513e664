//! Patrol walks: uniform random neighbor selection, routing-table refresh
//! from walk history, and periodic congestion propagation.

use rand::Rng;
use thiserror::Error;

use super::routing::{RouteEntry, RoutingTable};
use super::MobileAgent;
use crate::net::{ClassQueues, CongestionReport, LevelThresholds, NodeId, Topology};
use crate::time::SimTime;

#[derive(Debug, Error, PartialEq)]
pub enum PatrolError {
    /// No live neighbor to move to; the agent waits in place one tick.
    #[error("agent is isolated: no live neighbor")]
    Isolated,
}

/// Pick the next node of a patrol walk uniformly from `neighbors`.
/// `neighbors` must be sorted ascending so draws are reproducible.
pub fn patrol_step<R: Rng + ?Sized>(
    agent: &MobileAgent,
    neighbors: &[NodeId],
    rng: &mut R,
) -> Result<NodeId, PatrolError> {
    debug_assert_eq!(agent.mode, super::AgentMode::Patrol);
    debug_assert!(neighbors.windows(2).all(|w| w[0] < w[1]));
    if neighbors.is_empty() {
        return Err(PatrolError::Isolated);
    }
    Ok(neighbors[rng.random_range(0..neighbors.len())])
}

/// Refresh `table` (owned by `node`) from the visiting agent's walk history.
///
/// For each destination in the history, the candidate route follows the walk
/// backwards from `node` to the destination's most recent visit: next hop is
/// the node the agent came from, the rate estimate is the bottleneck over the
/// walked segment, and the segment is congested if any visited node on it
/// reported High for any class.
///
/// A candidate is installed when the entry is absent, or when the agent's
/// information is fresher and keeps the entry's next hop. Fresher information
/// proposing a *different* next hop is ignored: switching an established
/// route is the probe procedure's job, and letting every passing walker
/// re-point entries makes routes flap.
///
/// Returns the number of entries written.
pub fn update_routing_table(
    table: &mut RoutingTable,
    node: NodeId,
    agent: &MobileAgent,
    topo: &Topology,
) -> usize {
    let history = &agent.history;
    let Some(last) = history.last() else {
        return 0;
    };
    debug_assert_eq!(last.node, node, "agent must be at the node it updates");

    let mut changed = 0;
    let mut seen_destinations = Vec::new();
    // newest visit of each destination wins; scan newest-first
    for i in (0..history.len().saturating_sub(1)).rev() {
        let dst = history[i].node;
        if dst == node || seen_destinations.contains(&dst) {
            continue;
        }
        seen_destinations.push(dst);

        let info_time = history[i].arrived_at;
        let segment = &history[i..];

        // walked segment reversed: node -> ... -> dst; every hop must still
        // be a live link
        let mut est_rate = u64::MAX;
        let mut alive = true;
        for pair in segment.windows(2) {
            match topo.live_link(pair[0].node, pair[1].node) {
                Some(l) => est_rate = est_rate.min(l.rate_bps),
                None => {
                    alive = false;
                    break;
                }
            }
        }
        if !alive {
            continue;
        }
        let next_hop = segment[segment.len() - 2].node;
        let congested = segment.iter().any(|h| h.observed.any_high());

        let install = match table.get(dst) {
            None => true,
            Some(e) => e.updated_at < info_time && e.next_hop == next_hop,
        };
        if install
            && table.install(
                node,
                dst,
                RouteEntry {
                    next_hop,
                    est_path_rate: est_rate,
                    congested,
                    updated_at: info_time,
                },
            )
        {
            changed += 1;
        }
    }
    changed
}

/// Build the broadcast a node sends its live neighbors: the current
/// congestion report, one copy per neighbor.
pub fn propagate_congestion<T>(
    queues: &ClassQueues<T>,
    thresholds: LevelThresholds,
    neighbors: &[NodeId],
    now: SimTime,
) -> Vec<(NodeId, CongestionReport)> {
    let report = queues.report(thresholds, now);
    neighbors.iter().map(|&n| (n, report.clone())).collect()
}
