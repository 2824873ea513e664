//! Per-node routing state: one entry per destination, with freshness and a
//! congestion flag.

use std::collections::BTreeMap;

use crate::net::NodeId;
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq)]
pub struct RouteEntry {
    pub next_hop: NodeId,
    pub est_path_rate: u64,
    pub congested: bool,
    pub updated_at: SimTime,
}

/// Destination-keyed route entries. Iteration order is ascending destination
/// id, so table walks are deterministic.
#[derive(Debug, Clone, Default)]
pub struct RoutingTable {
    entries: BTreeMap<NodeId, RouteEntry>,
}

impl RoutingTable {
    pub fn new() -> RoutingTable {
        RoutingTable::default()
    }

    pub fn get(&self, dst: NodeId) -> Option<&RouteEntry> {
        self.entries.get(&dst)
    }

    pub fn next_hop(&self, dst: NodeId) -> Option<NodeId> {
        self.entries.get(&dst).map(|e| e.next_hop)
    }

    /// Insert or replace, refusing writes that would move `updated_at`
    /// backwards. Returns true when the table changed.
    pub fn install(&mut self, owner: NodeId, dst: NodeId, entry: RouteEntry) -> bool {
        debug_assert_ne!(entry.next_hop, owner, "next hop may not be the owner");
        debug_assert!(entry.est_path_rate > 0);
        if let Some(existing) = self.entries.get(&dst) {
            if entry.updated_at < existing.updated_at {
                return false;
            }
        }
        self.entries.insert(dst, entry);
        true
    }

    /// Drop every entry whose next hop fails `keep`; returns removed count.
    /// Used when links die so tables never point at non-neighbors.
    pub fn retain_next_hops<F>(&mut self, mut keep: F) -> usize
    where
        F: FnMut(NodeId) -> bool,
    {
        let before = self.entries.len();
        self.entries.retain(|_, e| keep(e.next_hop));
        before - self.entries.len()
    }

    pub fn mark_congested(&mut self, dst: NodeId) {
        if let Some(e) = self.entries.get_mut(&dst) {
            e.congested = true;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &RouteEntry)> {
        self.entries.iter().map(|(d, e)| (*d, e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn install_refuses_stale_writes() {
        let mut table = RoutingTable::new();
        let owner = NodeId(0);
        let dst = NodeId(3);
        let fresh = RouteEntry {
            next_hop: NodeId(1),
            est_path_rate: 1_000,
            congested: false,
            updated_at: SimTime(10),
        };
        assert!(table.install(owner, dst, fresh.clone()));
        let stale = RouteEntry {
            updated_at: SimTime(5),
            ..fresh.clone()
        };
        assert!(!table.install(owner, dst, stale));
        assert_eq!(table.get(dst).unwrap().updated_at, SimTime(10));
        // equal timestamps may rewrite
        assert!(table.install(owner, dst, fresh));
    }

    #[test]
    fn retain_purges_dead_next_hops() {
        let mut table = RoutingTable::new();
        for (dst, hop) in [(2, 1), (3, 1), (4, 5)] {
            table.install(
                NodeId(0),
                NodeId(dst),
                RouteEntry {
                    next_hop: NodeId(hop),
                    est_path_rate: 1,
                    congested: false,
                    updated_at: SimTime::ZERO,
                },
            );
        }
        let removed = table.retain_next_hops(|hop| hop != NodeId(1));
        assert_eq!(removed, 2);
        assert_eq!(table.len(), 1);
        assert_eq!(table.next_hop(NodeId(4)), Some(NodeId(5)));
    }
}
