//! Static multi-rate network graph with timed link events.
//!
//! Nodes are interned: names are sorted at construction and a [`NodeId`] is
//! the index into that sorted table, so ascending-id tie breaks coincide with
//! lexicographic name order and are reproducible across runs.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::SimTime;

/// Index of a node in the topology's sorted name table.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Bidirectional link between two nodes. Endpoints are stored with `a < b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    pub rate_bps: u64,
    pub prop_delay_ns: u64,
    pub up: bool,
}

impl Link {
    /// The endpoint opposite `n`, if `n` is an endpoint.
    pub fn peer(&self, n: NodeId) -> Option<NodeId> {
        if n == self.a {
            Some(self.b)
        } else if n == self.b {
            Some(self.a)
        } else {
            None
        }
    }
}

/// What a timed topology event does to a link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkAction {
    Up,
    Down,
    SetRate(u64),
}

/// A scheduled change to one link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkEvent {
    pub at: SimTime,
    pub a: NodeId,
    pub b: NodeId,
    pub action: LinkAction,
}

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("link endpoint `{0}` is not a declared node")]
    UnknownEndpoint(String),
    #[error("self-loop on node `{0}`")]
    SelfLoop(String),
    #[error("duplicate link between `{0}` and `{1}`")]
    DuplicateLink(String, String),
    #[error("link `{0}`-`{1}` has non-positive rate")]
    NonPositiveRate(String, String),
    #[error("duplicate node name `{0}`")]
    DuplicateNode(String),
}

/// The simulated world: interned node names, links, and timed link events.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    names: Vec<String>,
    links: Vec<Link>,
    // adjacency[v] = (neighbor, link index), sorted by neighbor id
    adjacency: Vec<Vec<(NodeId, usize)>>,
    pub events: Vec<LinkEvent>,
}

impl Topology {
    /// Build a topology from node names and `(a, b, rate_bps, prop_delay_ns)`
    /// link descriptions. Names are sorted before ids are assigned.
    pub fn new(
        nodes: &[String],
        links: &[(String, String, u64, u64)],
    ) -> Result<Topology, TopologyError> {
        let mut names: Vec<String> = nodes.to_vec();
        names.sort();
        for w in names.windows(2) {
            if w[0] == w[1] {
                return Err(TopologyError::DuplicateNode(w[0].clone()));
            }
        }

        let lookup = |name: &str| -> Result<NodeId, TopologyError> {
            names
                .binary_search_by(|n| n.as_str().cmp(name))
                .map(|i| NodeId(i as u32))
                .map_err(|_| TopologyError::UnknownEndpoint(name.to_string()))
        };

        let mut out = Vec::with_capacity(links.len());
        for (a, b, rate, prop) in links {
            let ia = lookup(a)?;
            let ib = lookup(b)?;
            if ia == ib {
                return Err(TopologyError::SelfLoop(a.clone()));
            }
            if *rate == 0 {
                return Err(TopologyError::NonPositiveRate(a.clone(), b.clone()));
            }
            let (lo, hi) = if ia < ib { (ia, ib) } else { (ib, ia) };
            if out
                .iter()
                .any(|l: &Link| l.a == lo && l.b == hi)
            {
                return Err(TopologyError::DuplicateLink(a.clone(), b.clone()));
            }
            out.push(Link {
                a: lo,
                b: hi,
                rate_bps: *rate,
                prop_delay_ns: *prop,
                up: true,
            });
        }

        let mut adjacency = vec![Vec::new(); names.len()];
        for (idx, l) in out.iter().enumerate() {
            adjacency[l.a.index()].push((l.b, idx));
            adjacency[l.b.index()].push((l.a, idx));
        }
        for adj in &mut adjacency {
            adj.sort_by_key(|&(n, _)| n);
        }

        Ok(Topology {
            names,
            links: out,
            adjacency,
            events: Vec::new(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.names.len() as u32).map(NodeId)
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.names[id.index()]
    }

    pub fn id_of(&self, name: &str) -> Option<NodeId> {
        self.names
            .binary_search_by(|n| n.as_str().cmp(name))
            .ok()
            .map(|i| NodeId(i as u32))
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, idx: usize) -> &Link {
        &self.links[idx]
    }

    /// Index of the (live or dead) link between `x` and `y`.
    pub fn link_index(&self, x: NodeId, y: NodeId) -> Option<usize> {
        self.adjacency[x.index()]
            .iter()
            .find(|&&(n, _)| n == y)
            .map(|&(_, i)| i)
    }

    /// The live link between `x` and `y`, if one exists and is up.
    pub fn live_link(&self, x: NodeId, y: NodeId) -> Option<&Link> {
        self.link_index(x, y)
            .map(|i| &self.links[i])
            .filter(|l| l.up)
    }

    /// Live neighbors of `v`, ascending by id.
    pub fn live_neighbors(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adjacency[v.index()]
            .iter()
            .filter(|&&(_, i)| self.links[i].up)
            .map(|&(n, _)| n)
    }

    /// Apply a link event in place. Unknown link pairs are ignored.
    pub fn apply_event(&mut self, ev: &LinkEvent) {
        if let Some(idx) = self.link_index(ev.a, ev.b) {
            match ev.action {
                LinkAction::Up => self.links[idx].up = true,
                LinkAction::Down => self.links[idx].up = false,
                LinkAction::SetRate(r) => {
                    if r > 0 {
                        self.links[idx].rate_bps = r;
                    }
                }
            }
        }
    }

    /// Hop distance from every node to `dst` over live links (BFS).
    /// `u32::MAX` marks unreachable nodes.
    pub fn hop_distances_to(&self, dst: NodeId) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.node_count()];
        dist[dst.index()] = 0;
        let mut frontier = std::collections::VecDeque::new();
        frontier.push_back(dst);
        while let Some(v) = frontier.pop_front() {
            let d = dist[v.index()];
            for n in self.live_neighbors(v) {
                if dist[n.index()] == u32::MAX {
                    dist[n.index()] = d + 1;
                    frontier.push_back(n);
                }
            }
        }
        dist
    }
}
