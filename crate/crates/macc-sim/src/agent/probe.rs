//! Path probing: clone agents at a congested node, walk each candidate path
//! hop by hop, rate the paths by measured channel delay, pick the winner, and
//! install it.

use thiserror::Error;

use super::routing::{RouteEntry, RoutingTable};
use super::{AgentId, AgentMode, MobileAgent};
use crate::net::{NodeId, Topology};
use crate::time::{transmission_ns, SimTime};

/// What a probe clone carries: where it came from, where it diverged, and the
/// path accumulated so far.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeContext {
    pub source: NodeId,
    pub destination: NodeId,
    pub divergence_node: NodeId,
    /// Starts at `source`, grows one node per hop.
    pub path_so_far: Vec<NodeId>,
    pub probe_size_bits: u64,
    /// Virtual injection instant at the source. Clones created mid-path are
    /// backdated by the idle traversal of the already-walked prefix, so the
    /// measured rate covers the whole path.
    pub injected_at: SimTime,
}

/// A completed measurement of one candidate path.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub path: Vec<NodeId>,
    pub channel_delay_ns: u64,
    /// probe size / channel delay, in bits per second.
    pub data_rate_bps: f64,
}

impl ProbeResult {
    pub fn hops(&self) -> usize {
        self.path.len().saturating_sub(1)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RerouteError {
    #[error("no eligible neighbor to probe through at `{0}`")]
    NoAlternative(NodeId),
}

#[derive(Debug, Error, PartialEq)]
pub enum ProbeError {
    #[error("no loop-free next hop from `{0}`")]
    DeadEnd(NodeId),
    #[error("probe arrived no later than it was injected")]
    ZeroDelay,
    #[error("every probe failed")]
    AllProbesFailed,
}

#[derive(Debug, Error, PartialEq)]
pub enum InstallError {
    #[error("a link on the selected path died before install")]
    StalePath,
}

/// Store-and-forward traversal time of `path` through an otherwise idle
/// network: per hop, transmission at the link rate plus propagation delay.
/// Dead or missing hops contribute nothing.
pub fn idle_path_delay_ns(path: &[NodeId], topo: &Topology, size_bits: u64) -> u64 {
    path.windows(2)
        .filter_map(|w| topo.live_link(w[0], w[1]))
        .map(|l| transmission_ns(size_bits, l.rate_bps) + l.prop_delay_ns)
        .sum()
}

/// Everything a detecting node knows when it decides to probe around a
/// congested next hop.
#[derive(Debug, Clone)]
pub struct RerouteRequest<'a> {
    pub detector: NodeId,
    pub congested_next_hop: NodeId,
    pub destination: NodeId,
    /// Node the triggering traffic arrived from; never probed through.
    pub upstream: Option<NodeId>,
    /// Path the triggering traffic took from its source up to and including
    /// the detector; clones inherit it so measurements span the full route.
    pub prefix: &'a [NodeId],
    pub probe_size_bits: u64,
    pub now: SimTime,
    /// Agent the clones descend from.
    pub parent: AgentId,
}

/// Clone one probe agent per eligible neighbor of the detector: every live
/// neighbor except the congested next hop and the node the traffic arrived
/// from. Returns `(first_hop, clone)` pairs; the engine transmits each clone
/// to its first hop as a control frame.
pub fn initiate_reroute(
    req: &RerouteRequest<'_>,
    topo: &Topology,
    mut next_id: impl FnMut() -> AgentId,
) -> Result<Vec<(NodeId, MobileAgent)>, RerouteError> {
    debug_assert_eq!(req.prefix.last(), Some(&req.detector));
    let prefix_delay = idle_path_delay_ns(req.prefix, topo, req.probe_size_bits);
    let injected_at = SimTime(req.now.as_nanos().saturating_sub(prefix_delay));

    let clones: Vec<(NodeId, MobileAgent)> = topo
        .live_neighbors(req.detector)
        .filter(|&n| n != req.congested_next_hop && Some(n) != req.upstream)
        .map(|via| {
            let agent = MobileAgent {
                agent_id: next_id(),
                mode: AgentMode::Probe,
                home: req.detector,
                location: req.detector,
                history: Vec::new(),
                lineage: Some(req.parent),
                probe_ctx: Some(ProbeContext {
                    source: req.prefix.first().copied().unwrap_or(req.detector),
                    destination: req.destination,
                    divergence_node: req.detector,
                    path_so_far: req.prefix.to_vec(),
                    probe_size_bits: req.probe_size_bits,
                    injected_at,
                }),
            };
            (via, agent)
        })
        .collect();

    if clones.is_empty() {
        return Err(RerouteError::NoAlternative(req.detector));
    }
    Ok(clones)
}

/// Where a probe goes next.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProbeStep {
    Next(NodeId),
    Arrived,
}

/// Decide the probe's next hop from its current location: prefer the local
/// routing entry toward the destination when it is live and loop-free,
/// otherwise the loop-free live neighbor with the least hop count to the
/// destination, ties broken by ascending node id.
pub fn probe_advance(
    agent: &MobileAgent,
    topo: &Topology,
    route_hint: impl Fn(NodeId, NodeId) -> Option<NodeId>,
) -> Result<ProbeStep, ProbeError> {
    debug_assert_eq!(agent.mode, AgentMode::Probe);
    let ctx = agent.probe_ctx.as_ref().expect("probe agent carries context");
    let here = agent.location;
    if here == ctx.destination {
        return Ok(ProbeStep::Arrived);
    }

    if let Some(hop) = route_hint(here, ctx.destination) {
        if !ctx.path_so_far.contains(&hop) && topo.live_link(here, hop).is_some() {
            return Ok(ProbeStep::Next(hop));
        }
    }

    let dist = topo.hop_distances_to(ctx.destination);
    let mut best: Option<(u32, NodeId)> = None;
    for n in topo.live_neighbors(here) {
        if ctx.path_so_far.contains(&n) || dist[n.index()] == u32::MAX {
            continue;
        }
        // neighbors iterate ascending, so strict < keeps the smallest id
        if best.map(|(d, _)| dist[n.index()] < d).unwrap_or(true) {
            best = Some((dist[n.index()], n));
        }
    }
    match best {
        Some((_, n)) => Ok(ProbeStep::Next(n)),
        None => Err(ProbeError::DeadEnd(here)),
    }
}

/// Rate a completed probe: channel delay is injection-to-arrival, data rate
/// is probe size over that delay.
pub fn measure_path_rate(
    ctx: &ProbeContext,
    arrival_time: SimTime,
) -> Result<ProbeResult, ProbeError> {
    if arrival_time <= ctx.injected_at {
        return Err(ProbeError::ZeroDelay);
    }
    let channel_delay_ns = arrival_time - ctx.injected_at;
    let data_rate_bps =
        ctx.probe_size_bits as f64 / (channel_delay_ns as f64 / 1_000_000_000.0);
    Ok(ProbeResult {
        path: ctx.path_so_far.clone(),
        channel_delay_ns,
        data_rate_bps,
    })
}

/// Pick the winning probe: highest data rate, ties by fewer hops, then by
/// lexicographically smallest node-id sequence. Order-independent.
pub fn select_path(results: &[ProbeResult]) -> Result<&ProbeResult, ProbeError> {
    results
        .iter()
        .min_by(|x, y| {
            y.data_rate_bps
                .partial_cmp(&x.data_rate_bps)
                .expect("probe rates are finite")
                .then(x.hops().cmp(&y.hops()))
                .then(x.path.cmp(&y.path))
        })
        .ok_or(ProbeError::AllProbesFailed)
}

/// Mutable access to per-node routing tables, for path installation.
pub trait TableStore {
    fn table_mut(&mut self, node: NodeId) -> &mut RoutingTable;
}

impl TableStore for Vec<RoutingTable> {
    fn table_mut(&mut self, node: NodeId) -> &mut RoutingTable {
        &mut self[node.index()]
    }
}

/// Point every node on the winning path at its successor for the path's
/// destination. Fails without touching any table if a path link died since
/// probing. Returns the number of entries written.
pub fn install_path(
    winner: &ProbeResult,
    now: SimTime,
    topo: &Topology,
    tables: &mut dyn TableStore,
) -> Result<usize, InstallError> {
    let path = &winner.path;
    if path.len() < 2 {
        return Ok(0);
    }
    if path
        .windows(2)
        .any(|w| topo.live_link(w[0], w[1]).is_none())
    {
        return Err(InstallError::StalePath);
    }
    let destination = *path.last().expect("path is non-empty");
    let est_path_rate = (winner.data_rate_bps as u64).max(1);
    let mut written = 0;
    for w in path.windows(2) {
        let entry = RouteEntry {
            next_hop: w[1],
            est_path_rate,
            congested: false,
            updated_at: now,
        };
        if tables.table_mut(w[0]).install(w[0], destination, entry) {
            written += 1;
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    const M: u64 = 1_000_000;

    fn ctx(path: &[u32], size: u64, injected_ns: u64) -> ProbeContext {
        ProbeContext {
            source: NodeId(path[0]),
            destination: NodeId(*path.last().unwrap()),
            divergence_node: NodeId(path[0]),
            path_so_far: path.iter().map(|&n| NodeId(n)).collect(),
            probe_size_bits: size,
            injected_at: SimTime(injected_ns),
        }
    }

    #[test]
    fn single_hop_rate_matches_link() {
        // 8000 bits over one 11 Mbps hop: ~727.3 us
        let delay = transmission_ns(8_000, 11 * M);
        let r = measure_path_rate(&ctx(&[0, 1], 8_000, 0), SimTime(delay)).unwrap();
        assert_eq!(r.channel_delay_ns, 727_273);
        assert!(r.data_rate_bps <= 11e6);
        assert!((r.data_rate_bps - 11e6).abs() / 11e6 < 1e-3);
    }

    #[test]
    fn two_equal_hops_halve_the_rate() {
        // two 2 Mbps hops, 8000 bits: 4 ms + 4 ms = 8 ms, rate exactly 1 Mbps
        let r = measure_path_rate(&ctx(&[0, 1, 2], 8_000, 0), SimTime(8_000_000)).unwrap();
        assert_eq!(r.data_rate_bps, 1e6);
    }

    #[test]
    fn zero_delay_is_a_fault() {
        assert_eq!(
            measure_path_rate(&ctx(&[0, 1], 8_000, 5), SimTime(5)),
            Err(ProbeError::ZeroDelay)
        );
    }

    fn result(rate: f64, path: &[u32]) -> ProbeResult {
        ProbeResult {
            path: path.iter().map(|&n| NodeId(n)).collect(),
            channel_delay_ns: 1,
            data_rate_bps: rate,
        }
    }

    #[test]
    fn select_highest_rate() {
        let p1 = result(0.786e6, &[8, 1, 3, 5, 4, 7]);
        let p2 = result(1.571e6, &[8, 1, 3, 5, 6, 7]);
        let forward = [p1.clone(), p2.clone()];
        assert_eq!(select_path(&forward).unwrap(), &p2);
        // order independence
        let reversed = [p2.clone(), p1];
        assert_eq!(select_path(&reversed).unwrap(), &p2);
        // singleton
        let single = [p2.clone()];
        assert_eq!(select_path(&single).unwrap(), &p2);
        assert_eq!(select_path(&[]), Err(ProbeError::AllProbesFailed));
    }

    #[test]
    fn select_ties_break_on_hops_then_ids() {
        let five = result(1e6, &[0, 1, 2, 3, 4, 5]);
        let six = result(1e6, &[0, 1, 2, 3, 4, 6, 5]);
        let by_hops = [six, five.clone()];
        assert_eq!(select_path(&by_hops).unwrap(), &five);

        let lex_small = result(1e6, &[0, 1, 5]);
        let lex_big = result(1e6, &[0, 2, 5]);
        let by_lex = [lex_big, lex_small.clone()];
        assert_eq!(select_path(&by_lex).unwrap(), &lex_small);
    }

    fn diamond() -> Topology {
        // A - B - D and A - C - D, plus E dangling off B
        let names: Vec<String> = ["A", "B", "C", "D", "E"].iter().map(|s| s.to_string()).collect();
        Topology::new(
            &names,
            &[
                ("A".into(), "B".into(), 11 * M, 0),
                ("A".into(), "C".into(), 11 * M, 0),
                ("B".into(), "D".into(), 11 * M, 0),
                ("C".into(), "D".into(), 11 * M, 0),
                ("B".into(), "E".into(), 11 * M, 0),
            ],
        )
        .unwrap()
    }

    fn probe_at(topo: &Topology, walked: &[&str], dst: &str) -> MobileAgent {
        let path: Vec<NodeId> = walked.iter().map(|n| topo.id_of(n).unwrap()).collect();
        MobileAgent {
            agent_id: AgentId(9),
            mode: AgentMode::Probe,
            home: path[0],
            location: *path.last().unwrap(),
            history: Vec::new(),
            lineage: Some(AgentId(1)),
            probe_ctx: Some(ProbeContext {
                source: path[0],
                destination: topo.id_of(dst).unwrap(),
                divergence_node: path[0],
                path_so_far: path,
                probe_size_bits: 8_000,
                injected_at: SimTime::ZERO,
            }),
        }
    }

    #[test]
    fn advance_prefers_routing_entry() {
        let topo = diamond();
        let agent = probe_at(&topo, &["A"], "D");
        let c = topo.id_of("C").unwrap();
        // hint sends it via C even though B has the same hop count
        let step = probe_advance(&agent, &topo, |_, _| Some(c)).unwrap();
        assert_eq!(step, ProbeStep::Next(c));
    }

    #[test]
    fn advance_falls_back_to_least_hops_ascending_id() {
        let topo = diamond();
        let agent = probe_at(&topo, &["A"], "D");
        // no hint: B and C both two hops out; B wins by id
        let step = probe_advance(&agent, &topo, |_, _| None).unwrap();
        assert_eq!(step, ProbeStep::Next(topo.id_of("B").unwrap()));
        // hint pointing back into the walked path is ignored
        let a = topo.id_of("A").unwrap();
        let agent2 = probe_at(&topo, &["A", "B"], "D");
        let step = probe_advance(&agent2, &topo, |_, _| Some(a)).unwrap();
        assert_eq!(step, ProbeStep::Next(topo.id_of("D").unwrap()));
    }

    #[test]
    fn advance_arrives_and_dead_ends() {
        let topo = diamond();
        let agent = probe_at(&topo, &["A", "B", "D"], "D");
        assert_eq!(
            probe_advance(&agent, &topo, |_, _| None).unwrap(),
            ProbeStep::Arrived
        );
        // at E every neighbor is already on the path
        let stuck = probe_at(&topo, &["A", "B", "E"], "D");
        assert_eq!(
            probe_advance(&stuck, &topo, |_, _| None),
            Err(ProbeError::DeadEnd(topo.id_of("E").unwrap()))
        );
    }

    #[test]
    fn reroute_clones_skip_congested_hop_and_upstream() {
        // detector F with neighbors D (upstream), E, G, H (congested hop)
        let names: Vec<String> = ["D", "E", "F", "G", "H"].iter().map(|s| s.to_string()).collect();
        let topo = Topology::new(
            &names,
            &[
                ("D".into(), "F".into(), 11 * M, 0),
                ("F".into(), "E".into(), 2 * M, 0),
                ("F".into(), "G".into(), 5_500_000, 0),
                ("F".into(), "H".into(), M, 0),
            ],
        )
        .unwrap();
        let f = topo.id_of("F").unwrap();
        let d = topo.id_of("D").unwrap();
        let h = topo.id_of("H").unwrap();
        let mut next = 100u64;
        let prefix = [d, f];
        let clones = initiate_reroute(
            &RerouteRequest {
                detector: f,
                congested_next_hop: h,
                destination: h,
                upstream: Some(d),
                prefix: &prefix,
                probe_size_bits: 8_000,
                now: SimTime(1_000_000),
                parent: AgentId(1),
            },
            &topo,
            || {
                next += 1;
                AgentId(next)
            },
        )
        .unwrap();
        let vias: Vec<&str> = clones.iter().map(|(via, _)| topo.name(*via)).collect();
        assert_eq!(vias, vec!["E", "G"]);
        assert!(clones.iter().all(|(_, a)| a.lineage == Some(AgentId(1))));
        assert_ne!(clones[0].1.agent_id, clones[1].1.agent_id);
        // prefix D-F at 11 Mbps backdates injection by one idle hop
        let backdated = 1_000_000 - transmission_ns(8_000, 11 * M);
        assert!(clones
            .iter()
            .all(|(_, a)| a.probe_ctx.as_ref().unwrap().injected_at == SimTime(backdated)));

        // a detector whose only neighbor is the congested hop has nowhere to go
        let e = topo.id_of("E").unwrap();
        let prefix = [e];
        let err = initiate_reroute(
            &RerouteRequest {
                detector: e,
                congested_next_hop: f,
                destination: h,
                upstream: None,
                prefix: &prefix,
                probe_size_bits: 8_000,
                now: SimTime::ZERO,
                parent: AgentId(1),
            },
            &topo,
            || AgentId(0),
        )
        .unwrap_err();
        assert_eq!(err, RerouteError::NoAlternative(e));
    }

    #[test]
    fn reroute_clones_one_per_eligible_neighbor() {
        let names: Vec<String> = ["A", "B", "C", "D", "E", "X", "Z"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let links: Vec<(String, String, u64, u64)> = ["A", "B", "C", "D", "Z"]
            .iter()
            .map(|n| ("X".to_string(), n.to_string(), M, 0))
            .collect();
        let topo = Topology::new(&names, &links).unwrap();
        let x = topo.id_of("X").unwrap();
        let z = topo.id_of("Z").unwrap();
        let mut next = 0u64;
        let prefix = [x];
        let clones = initiate_reroute(
            &RerouteRequest {
                detector: x,
                congested_next_hop: z,
                destination: z,
                upstream: None,
                prefix: &prefix,
                probe_size_bits: 8_000,
                now: SimTime::ZERO,
                parent: AgentId(7),
            },
            &topo,
            || {
                next += 1;
                AgentId(next)
            },
        )
        .unwrap();
        assert_eq!(clones.len(), 4);
        let mut ids: Vec<u64> = clones.iter().map(|(_, a)| a.agent_id.0).collect();
        ids.dedup();
        assert_eq!(ids.len(), 4);
    }

    #[test]
    fn install_writes_one_entry_per_hop() {
        let names: Vec<String> = (0..6).map(|i| format!("N{i}")).collect();
        let links: Vec<(String, String, u64, u64)> = (0..5)
            .map(|i| (format!("N{i}"), format!("N{}", i + 1), 2 * M, 0))
            .collect();
        let topo = Topology::new(&names, &links).unwrap();
        let path: Vec<NodeId> = (0..6).map(NodeId).collect();
        let winner = ProbeResult {
            path: path.clone(),
            channel_delay_ns: 1,
            data_rate_bps: 1.5e6,
        };
        let mut tables: Vec<RoutingTable> = vec![RoutingTable::new(); 6];
        let written = install_path(&winner, SimTime(10), &topo, &mut tables).unwrap();
        assert_eq!(written, 5);
        for (i, table) in tables.iter().enumerate().take(5) {
            let e = table.get(NodeId(5)).unwrap();
            assert_eq!(e.next_hop, NodeId(i as u32 + 1));
            assert_eq!(e.est_path_rate, 1_500_000);
            assert_eq!(e.updated_at, SimTime(10));
        }
        assert!(tables[5].is_empty());

        // re-install is idempotent apart from timestamps
        let written = install_path(&winner, SimTime(20), &topo, &mut tables).unwrap();
        assert_eq!(written, 5);
        assert_eq!(tables[0].get(NodeId(5)).unwrap().updated_at, SimTime(20));
        assert_eq!(tables[0].next_hop(NodeId(5)), Some(NodeId(1)));

        // a dead link stales the whole install
        let mut broken = topo.clone();
        broken.apply_event(&crate::net::LinkEvent {
            at: SimTime::ZERO,
            a: NodeId(2),
            b: NodeId(3),
            action: crate::net::LinkAction::Down,
        });
        let err = install_path(&winner, SimTime(30), &broken, &mut tables).unwrap_err();
        assert_eq!(err, InstallError::StalePath);
        assert_eq!(tables[0].get(NodeId(5)).unwrap().updated_at, SimTime(20));
    }
}
