//! Congestion-blind routing: shortest hop count, fixed until the topology
//! itself changes.

use crate::agent::{RouteEntry, RoutingTable};
use crate::net::Topology;
use crate::time::SimTime;

/// Shortest-hop-count tables for every node, ties broken by ascending
/// next-hop id. Unreachable destinations get no entry. The rate estimate is
/// the bottleneck along the chosen path.
pub fn baseline_route(topo: &Topology, at: SimTime) -> Vec<RoutingTable> {
    let mut tables = vec![RoutingTable::new(); topo.node_count()];
    for dst in topo.node_ids() {
        let dist = topo.hop_distances_to(dst);
        for v in topo.node_ids() {
            if v == dst || dist[v.index()] == u32::MAX {
                continue;
            }
            let mut cur = v;
            let mut next_hop = None;
            let mut est = u64::MAX;
            while cur != dst {
                // live_neighbors iterates ascending, first match wins ties
                let step = topo
                    .live_neighbors(cur)
                    .find(|n| dist[n.index()] + 1 == dist[cur.index()])
                    .expect("finite distance implies a descending neighbor");
                est = est.min(
                    topo.live_link(cur, step)
                        .expect("neighbor implies live link")
                        .rate_bps,
                );
                next_hop.get_or_insert(step);
                cur = step;
            }
            tables[v.index()].install(
                v,
                dst,
                RouteEntry {
                    next_hop: next_hop.expect("loop ran at least once"),
                    est_path_rate: est,
                    congested: false,
                    updated_at: at,
                },
            );
        }
    }
    tables
}
