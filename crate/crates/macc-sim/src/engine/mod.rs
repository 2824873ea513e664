//! Deterministic discrete-event core.
//!
//! One run owns a working copy of the topology, per-node state, and an event
//! heap ordered by (time, insertion sequence). Identical (scenario, mode,
//! seed) triples replay the exact same event order, so metrics are
//! bit-identical across runs. Independent runs share nothing and may execute
//! in parallel.

mod baseline;
mod event;
mod metrics;
mod packet;

pub use baseline::baseline_route;
pub use event::{Arrival, Event, EventKind, EventQueue};
pub use metrics::{
    mean_ns, nearest_rank, ns_to_ms, FlowMetrics, Metrics, Mode, RerouteRecord, RunTotals, Sample,
    SampleRow,
};
pub use packet::{AgentFrame, Frame, Packet, ReportFrame};

use std::collections::{BTreeMap, BTreeSet};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::agent::probe::TableStore;
use crate::agent::{
    initiate_reroute, install_path, measure_path_rate, patrol_step, probe::idle_path_delay_ns,
    probe_advance, propagate_congestion, select_path, update_routing_table, AgentId, AgentMode,
    MobileAgent, ProbeContext, ProbeStep, RerouteRequest, RouteEntry, RoutingTable,
};
use crate::net::{
    detect_mismatch, node_priority, ClassQueues, CongestionLevel, CongestionReport, NodeId,
    PathError, Topology, TrafficClass, Transition,
};
use crate::scenario::{Flow, Params, Scenario};
use crate::time::{transmission_ns, SimTime};

/// Runtime state of one node.
#[derive(Debug)]
pub struct NodeState {
    pub id: NodeId,
    pub queues: ClassQueues<Frame>,
    pub congestion: CongestionReport,
    pub priority: u32,
    pub routing_table: RoutingTable,
    pub neighbor_views: BTreeMap<NodeId, (CongestionReport, SimTime)>,
    // reroute bookkeeping
    high_streak: [u32; 4],
    recent_fwd: BTreeMap<NodeId, FwdObservation>,
    last_agent: Option<AgentId>,
}

/// What a node last saw itself forward toward a destination; the reroute
/// trigger works from this.
#[derive(Debug, Clone)]
struct FwdObservation {
    next_hop: NodeId,
    class: TrafficClass,
    upstream: Option<NodeId>,
    /// Source-to-here path of the observed packet, both ends inclusive.
    prefix: Vec<NodeId>,
    at: SimTime,
}

#[derive(Debug)]
struct FlowState {
    spec: Flow,
    next_seq: u64,
    sent: u64,
    delivered: u64,
    dropped_queue: u64,
    dropped_noroute: u64,
    in_transit: u64,
    delivered_bits: u64,
    delays_ns: Vec<u64>,
    active: bool,
}

#[derive(Debug)]
struct Transaction {
    detector: NodeId,
    destination: NodeId,
    probes: usize,
    outstanding: BTreeSet<AgentId>,
    results: Vec<crate::agent::ProbeResult>,
    finalized: bool,
    /// Send the winner back to the source for installation; measurement
    /// harnesses turn this off.
    report_winner: bool,
    log_idx: usize,
}

impl TableStore for Vec<NodeState> {
    fn table_mut(&mut self, node: NodeId) -> &mut RoutingTable {
        &mut self[node.index()].routing_table
    }
}

/// One simulation run in progress.
pub struct Simulator {
    mode: Mode,
    seed: u64,
    params: Params,
    duration: SimTime,
    flows: Vec<FlowState>,
    now: SimTime,
    events: EventQueue,
    topo: Topology,
    nodes: Vec<NodeState>,
    /// Per link, per direction (0 = a->b): a transmission in progress.
    busy: Vec<[bool; 2]>,
    resident_agents: BTreeMap<AgentId, MobileAgent>,
    agent_rngs: BTreeMap<AgentId, ChaCha8Rng>,
    next_agent_id: u64,
    next_packet_id: u64,
    txns: Vec<Transaction>,
    cooldown_until: BTreeMap<(NodeId, NodeId), SimTime>,
    control_bits: u64,
    data_bits: u64,
    reroutes_installed: u64,
    reroute_log: Vec<RerouteRecord>,
    samples: Vec<Sample>,
    delivered_order: Vec<(usize, u64)>,
    quiet: bool,
    done: bool,
}

/// Run a scenario to completion.
pub fn run(scenario: &Scenario, mode: Mode, seed: u64) -> Metrics {
    Simulator::new(scenario, mode, seed).run_to_end()
}

impl Simulator {
    pub fn new(scenario: &Scenario, mode: Mode, seed: u64) -> Simulator {
        Simulator::new_inner(scenario, mode, seed, false)
    }

    fn new_inner(scenario: &Scenario, mode: Mode, seed: u64, quiet: bool) -> Simulator {
        let topo = scenario.topology.clone();
        let params = scenario.params.clone();
        let t0 = SimTime::ZERO;

        // both modes start on the already-selected shortest-hop routes; the
        // agent protocol then adapts them
        let tables = baseline_route(&topo, t0);
        let nodes: Vec<NodeState> = topo
            .node_ids()
            .zip(tables)
            .map(|(id, routing_table)| NodeState {
                id,
                queues: ClassQueues::new(params.queue_capacity_pkts),
                congestion: CongestionReport::idle(t0),
                priority: node_priority(&CongestionReport::idle(t0)),
                routing_table,
                neighbor_views: BTreeMap::new(),
                high_streak: [0; 4],
                recent_fwd: BTreeMap::new(),
                last_agent: None,
            })
            .collect();

        let flows: Vec<FlowState> = scenario
            .flows
            .iter()
            .map(|spec| FlowState {
                spec: spec.clone(),
                next_seq: 0,
                sent: 0,
                delivered: 0,
                dropped_queue: 0,
                dropped_noroute: 0,
                in_transit: 0,
                delivered_bits: 0,
                delays_ns: Vec::new(),
                active: false,
            })
            .collect();

        let mut sim = Simulator {
            mode,
            seed,
            duration: scenario.duration,
            now: t0,
            events: EventQueue::new(),
            busy: vec![[false; 2]; topo.links().len()],
            nodes,
            flows,
            resident_agents: BTreeMap::new(),
            agent_rngs: BTreeMap::new(),
            next_agent_id: topo.node_count() as u64,
            next_packet_id: 0,
            txns: Vec::new(),
            cooldown_until: BTreeMap::new(),
            control_bits: 0,
            data_bits: 0,
            reroutes_installed: 0,
            reroute_log: Vec::new(),
            samples: Vec::new(),
            delivered_order: Vec::new(),
            quiet,
            topo,
            params,
            done: false,
        };

        for (index, ev) in sim.topo.events.clone().iter().enumerate() {
            sim.events.push(ev.at, EventKind::LinkEvent { index });
        }
        for (flow, fs) in sim.flows.iter().enumerate() {
            if fs.spec.start <= sim.duration {
                sim.events.push(fs.spec.start, EventKind::FlowStart { flow });
            }
            if fs.spec.stop <= sim.duration {
                sim.events.push(fs.spec.stop, EventKind::FlowStop { flow });
            }
        }
        if !quiet {
            sim.events
                .push(SimTime(sim.params.sample_interval_ns), EventKind::MetricsSample);
        }
        if mode == Mode::Agent && !quiet {
            // one patrol agent homed per node; ids follow node order
            for id in sim.topo.node_ids() {
                let agent_id = AgentId(id.0 as u64 + 1);
                let agent = MobileAgent::patrol(agent_id, id);
                let label = format!("patrol/{}", sim.topo.name(id));
                sim.agent_rngs.insert(agent_id, substream(seed, &label));
                sim.resident_agents.insert(agent_id, agent);
                sim.events
                    .push(SimTime(sim.params.patrol_step_ns), EventKind::AgentStep { agent: agent_id });
            }
            for id in sim.topo.node_ids() {
                sim.events.push(
                    SimTime(sim.params.propagation_interval_ns),
                    EventKind::CongestionBroadcast { node: id },
                );
            }
        }
        sim
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn routing_table(&self, node: NodeId) -> &RoutingTable {
        &self.nodes[node.index()].routing_table
    }

    pub fn node(&self, node: NodeId) -> &NodeState {
        &self.nodes[node.index()]
    }

    pub fn reroute_log(&self) -> &[RerouteRecord] {
        &self.reroute_log
    }

    /// (flow, sequence number) of every delivered packet, in delivery order.
    pub fn delivered_order(&self) -> &[(usize, u64)] {
        &self.delivered_order
    }

    /// Process the next event; false once the run is over.
    pub fn step(&mut self) -> bool {
        if self.done {
            return false;
        }
        let Some(ev) = self.events.pop() else {
            self.now = self.duration;
            self.done = true;
            return false;
        };
        if ev.at > self.duration {
            self.now = self.duration;
            self.done = true;
            return false;
        }
        debug_assert!(ev.at >= self.now, "time went backwards");
        self.now = ev.at;
        self.dispatch(ev.kind);
        true
    }

    /// Run every event at or before `until`.
    pub fn run_until(&mut self, until: SimTime) {
        while self.events.peek_at().map(|t| t <= until).unwrap_or(false) {
            if !self.step() {
                return;
            }
        }
        if self.now < until {
            self.now = until.min(self.duration);
        }
    }

    pub fn run_to_end(mut self) -> Metrics {
        while self.step() {}
        self.collect_metrics()
    }

    fn schedule(&mut self, at: SimTime, kind: EventKind) {
        self.events.push(at, kind);
    }

    fn dispatch(&mut self, kind: EventKind) {
        match kind {
            EventKind::FlowStart { flow } => {
                self.flows[flow].active = true;
                self.generate_packet(flow);
            }
            EventKind::FlowStop { flow } => {
                self.flows[flow].active = false;
            }
            EventKind::PacketArrival { node, arrival } => match arrival {
                Arrival::FromApp { flow } => self.generate_packet(flow),
                Arrival::Wire(frame) => self.handle_wire_arrival(node, frame),
            },
            EventKind::TransmitDone { link, dir } => {
                self.busy[link][dir] = false;
                let l = self.topo.link(link);
                let v = if dir == 0 { l.a } else { l.b };
                self.service_next(v, link);
            }
            EventKind::AgentStep { agent } => self.handle_agent_step(agent),
            EventKind::CongestionBroadcast { node } => self.handle_broadcast(node),
            EventKind::ProbeTimeout { txn, agent } => {
                if !self.txns[txn].finalized && self.txns[txn].outstanding.remove(&agent) {
                    self.maybe_finalize(txn);
                }
            }
            EventKind::LinkEvent { index } => self.handle_link_event(index),
            EventKind::MetricsSample => {
                self.take_sample();
                let next = self.now + self.params.sample_interval_ns;
                if next <= self.duration {
                    self.schedule(next, EventKind::MetricsSample);
                }
            }
        }
    }

    // ----- traffic ------------------------------------------------------

    fn generate_packet(&mut self, flow: usize) {
        let (src, stop) = (self.flows[flow].spec.src, self.flows[flow].spec.stop);
        if self.now >= stop {
            return;
        }
        let fs = &mut self.flows[flow];
        let packet = Packet {
            id: self.next_packet_id,
            flow,
            seq: fs.next_seq,
            size_bits: fs.spec.packet_size_bits,
            class: fs.spec.class,
            created_at: self.now,
            delivered_at: None,
            src: fs.spec.src,
            dst: fs.spec.dst,
            trace: Vec::new(),
            hops: 0,
        };
        self.next_packet_id += 1;
        fs.next_seq += 1;
        fs.sent += 1;

        let next = self.now + fs.spec.interval_ns();
        if next < stop && next <= self.duration {
            self.schedule(
                next,
                EventKind::PacketArrival {
                    node: src,
                    arrival: Arrival::FromApp { flow },
                },
            );
        }
        self.handle_data_arrival(src, packet);
    }

    fn handle_wire_arrival(&mut self, node: NodeId, frame: Frame) {
        match frame {
            Frame::Data(packet) => {
                self.flows[packet.flow].in_transit -= 1;
                self.handle_data_arrival(node, packet);
            }
            Frame::Agent(af) => match af.agent.mode {
                AgentMode::Patrol => self.handle_patrol_arrival(node, af),
                AgentMode::Probe => self.handle_probe_arrival(node, af),
            },
            Frame::Report(rf) => self.handle_report_arrival(node, rf),
        }
    }

    fn handle_data_arrival(&mut self, node: NodeId, mut packet: Packet) {
        if node == packet.dst {
            packet.delivered_at = Some(self.now);
            self.delivered_order.push((packet.flow, packet.seq));
            let fs = &mut self.flows[packet.flow];
            fs.delivered += 1;
            fs.delivered_bits += packet.size_bits;
            fs.delays_ns.push(self.now - packet.created_at);
            return;
        }
        if packet.hops >= self.params.max_hops {
            self.flows[packet.flow].dropped_noroute += 1;
            return;
        }
        let Some(next_hop) = self.nodes[node.index()].routing_table.next_hop(packet.dst) else {
            self.flows[packet.flow].dropped_noroute += 1;
            return;
        };

        if self.mode == Mode::Agent {
            let mut prefix = packet.trace.clone();
            prefix.push(node);
            self.nodes[node.index()].recent_fwd.insert(
                packet.dst,
                FwdObservation {
                    next_hop,
                    class: packet.class,
                    upstream: packet.trace.last().copied(),
                    prefix,
                    at: self.now,
                },
            );
        }

        let link = self
            .topo
            .link_index(node, next_hop)
            .expect("table next hops are neighbors");
        let class = packet.class;
        let flow = packet.flow;
        match self.nodes[node.index()].queues.enqueue(class, Frame::Data(packet)) {
            Err(_) => {
                self.flows[flow].dropped_queue += 1;
            }
            Ok(transition) => {
                self.note_transition(node, transition);
                self.service_next(node, link);
            }
        }
    }

    /// Serve the head-of-line frame bound for this link, if the link is up
    /// and idle: highest class first, FIFO within class.
    fn service_next(&mut self, v: NodeId, link_idx: usize) {
        let link = self.topo.link(link_idx);
        if !link.up {
            return;
        }
        let dir = if link.a == v { 0 } else { 1 };
        if self.busy[link_idx][dir] {
            return;
        }
        let w = link.peer(v).expect("v is an endpoint");
        let (rate, prop) = (link.rate_bps, link.prop_delay_ns);

        let taken = {
            let node = &mut self.nodes[v.index()];
            let table = &node.routing_table;
            node.queues.take_first(|_, frame| match frame {
                Frame::Data(p) => table.next_hop(p.dst) == Some(w),
                Frame::Agent(a) => a.to == w,
                Frame::Report(r) => r.reverse_path.get(r.pos) == Some(&w),
            })
        };
        let Some((_, frame, transition)) = taken else {
            return;
        };

        self.busy[link_idx][dir] = true;
        let size = frame.size_bits();
        if frame.is_control() {
            self.control_bits += size;
        } else {
            self.data_bits += size;
        }
        let frame = match frame {
            Frame::Data(mut p) => {
                self.flows[p.flow].in_transit += 1;
                p.trace.push(v);
                p.hops += 1;
                Frame::Data(p)
            }
            other => other,
        };
        let tx = transmission_ns(size, rate);
        self.schedule(self.now + tx, EventKind::TransmitDone { link: link_idx, dir });
        self.schedule(
            self.now + tx + prop,
            EventKind::PacketArrival {
                node: w,
                arrival: Arrival::Wire(frame),
            },
        );
        self.note_transition(v, transition);
    }

    /// Re-try every idle outgoing link of `v`; used after table changes so
    /// queued frames whose route flipped are not stranded.
    fn service_sweep(&mut self, v: NodeId) {
        let links: Vec<usize> = self.topo.live_neighbors(v).map(|n| {
            self.topo.link_index(v, n).expect("neighbor implies link")
        }).collect();
        for link in links {
            self.service_next(v, link);
        }
    }

    fn note_transition(&mut self, v: NodeId, transition: Transition) {
        if transition != Transition::None && self.mode == Mode::Agent && !self.quiet {
            self.propagate_now(v);
        }
    }

    /// Recompute this node's congestion report and push it to every live
    /// neighbor's view, timestamped now.
    fn propagate_now(&mut self, v: NodeId) {
        let thresholds = self.params.thresholds();
        let neighbors: Vec<NodeId> = self.topo.live_neighbors(v).collect();
        let msgs = propagate_congestion(
            &self.nodes[v.index()].queues,
            thresholds,
            &neighbors,
            self.now,
        );
        let report = self.nodes[v.index()].queues.report(thresholds, self.now);
        {
            let node = &mut self.nodes[v.index()];
            node.priority = node_priority(&report);
            node.congestion = report;
        }
        for (n, r) in msgs {
            self.nodes[n.index()].neighbor_views.insert(v, (r, self.now));
        }
    }

    // ----- patrol agents ------------------------------------------------

    fn handle_agent_step(&mut self, agent_id: AgentId) {
        let Some(agent) = self.resident_agents.get(&agent_id) else {
            return;
        };
        let here = agent.location;
        let neighbors: Vec<NodeId> = self.topo.live_neighbors(here).collect();
        let rng = self.agent_rngs.get_mut(&agent_id).expect("patrol rng exists");
        let step_period = self.params.patrol_step_ns;
        match patrol_step(agent, &neighbors, rng) {
            Err(_) => {
                // isolated: wait in place one tick
                self.schedule(self.now + step_period, EventKind::AgentStep { agent: agent_id });
            }
            Ok(next) => {
                let agent = self
                    .resident_agents
                    .remove(&agent_id)
                    .expect("agent checked resident");
                let frame = Frame::Agent(AgentFrame {
                    agent,
                    to: next,
                    size_bits: self.params.control_frame_bits,
                    txn: None,
                });
                if let Err(Frame::Agent(af)) = self.send_control_frame(here, next, frame) {
                    // migration frame refused: the move failed, retry later
                    self.resident_agents.insert(agent_id, af.agent);
                    self.schedule(self.now + step_period, EventKind::AgentStep { agent: agent_id });
                }
            }
        }
    }

    fn handle_patrol_arrival(&mut self, node: NodeId, af: AgentFrame) {
        debug_assert_eq!(af.to, node);
        let thresholds = self.params.thresholds();
        let observed = self.nodes[node.index()].queues.report(thresholds, self.now);
        let mut agent = af.agent;
        agent.record_arrival(node, self.now, observed, self.params.patrol_history_cap);

        let changed = {
            let topo = &self.topo;
            let state = &mut self.nodes[node.index()];
            state.last_agent = Some(agent.agent_id);
            update_routing_table(&mut state.routing_table, node, &agent, topo)
        };
        if changed > 0 {
            self.service_sweep(node);
        }
        let agent_id = agent.agent_id;
        self.resident_agents.insert(agent_id, agent);
        self.schedule(
            self.now + self.params.patrol_step_ns,
            EventKind::AgentStep { agent: agent_id },
        );
    }

    // ----- congestion broadcasts and reroute triggers --------------------

    fn handle_broadcast(&mut self, node: NodeId) {
        self.propagate_now(node);

        // track sustained High per class
        let report = self.nodes[node.index()].congestion.clone();
        for class in TrafficClass::ALL {
            let streak = &mut self.nodes[node.index()].high_streak[class.index()];
            if report.level_of(class) == CongestionLevel::High {
                *streak += 1;
            } else {
                *streak = 0;
            }
        }

        let interval = self.params.propagation_interval_ns;
        let next = self.now + interval;
        if next <= self.duration {
            self.schedule(next, EventKind::CongestionBroadcast { node });
        }

        // reroute trigger: this node heads a mismatched link on a path it is
        // actively forwarding, and its own level for that class stayed High
        // over the configured number of reports
        let candidates: Vec<(NodeId, FwdObservation)> = {
            let state = &self.nodes[node.index()];
            state
                .recent_fwd
                .iter()
                .filter(|(_, fwd)| fwd.at + interval >= self.now)
                .filter(|(_, fwd)| {
                    state.high_streak[fwd.class.index()]
                        >= self.params.high_streak_to_reroute
                })
                .filter(|(dst, _)| {
                    self.cooldown_until
                        .get(&(node, **dst))
                        .map(|&t| self.now >= t)
                        .unwrap_or(true)
                })
                .filter(|(dst, _)| {
                    !self
                        .txns
                        .iter()
                        .any(|t| !t.finalized && t.detector == node && t.destination == **dst)
                })
                .filter(|(_, fwd)| {
                    let mut path = fwd.prefix.clone();
                    path.push(fwd.next_hop);
                    let distinct = path
                        .iter()
                        .all(|n| path.iter().filter(|m| *m == n).count() == 1);
                    distinct
                        && detect_mismatch(&path, &self.topo)
                            .map(|flags| flags.contains(&node))
                            .unwrap_or(false)
                })
                .map(|(dst, fwd)| (*dst, fwd.clone()))
                .collect()
        };
        for (dst, fwd) in candidates {
            self.start_reroute(node, dst, fwd);
        }
    }

    fn start_reroute(&mut self, detector: NodeId, destination: NodeId, fwd: FwdObservation) {
        self.cooldown_until.insert(
            (detector, destination),
            self.now + self.params.reroute_cooldown_ns,
        );
        let parent = self.nodes[detector.index()]
            .last_agent
            .unwrap_or(AgentId(detector.0 as u64 + 1));
        let probe_size = self.params.probe_size_bits;

        let mut counter = self.next_agent_id;
        let clones = initiate_reroute(
            &RerouteRequest {
                detector,
                congested_next_hop: fwd.next_hop,
                destination,
                upstream: fwd.upstream,
                prefix: &fwd.prefix,
                probe_size_bits: probe_size,
                now: self.now,
                parent,
            },
            &self.topo,
            || {
                counter += 1;
                AgentId(counter)
            },
        );
        self.next_agent_id = counter;
        let Ok(clones) = clones else {
            // NoAlternative: keep the current route
            return;
        };

        self.nodes[detector.index()].routing_table.mark_congested(destination);

        let txn_id = self.txns.len();
        self.txns.push(Transaction {
            detector,
            destination,
            probes: clones.len(),
            outstanding: BTreeSet::new(),
            results: Vec::new(),
            finalized: false,
            report_winner: true,
            log_idx: usize::MAX,
        });

        for (via, agent) in clones {
            let agent_id = agent.agent_id;
            // a probe that outlives ten times its idle-network schedule is
            // declared failed
            let mut est_path = fwd.prefix.clone();
            est_path.push(via);
            let mut est = idle_path_delay_ns(&est_path, &self.topo, probe_size);
            if let Some(rest) = greedy_shortest_path(&self.topo, via, destination) {
                est += idle_path_delay_ns(&rest, &self.topo, probe_size);
            }
            let deadline = self.now + self.params.probe_timeout_factor * est.max(1_000_000);
            self.schedule(deadline, EventKind::ProbeTimeout { txn: txn_id, agent: agent_id });

            let frame = Frame::Agent(AgentFrame {
                agent,
                to: via,
                size_bits: probe_size,
                txn: Some(txn_id),
            });
            if self.send_control_frame(detector, via, frame).is_ok() {
                self.txns[txn_id].outstanding.insert(agent_id);
            }
        }
        self.maybe_finalize(txn_id);
    }

    fn handle_probe_arrival(&mut self, node: NodeId, af: AgentFrame) {
        debug_assert_eq!(af.to, node);
        let txn_id = af.txn.expect("probe frames carry their transaction");
        if self.txns[txn_id].finalized
            || !self.txns[txn_id].outstanding.contains(&af.agent.agent_id)
        {
            return; // timed out or settled; drop the straggler
        }
        let thresholds = self.params.thresholds();
        let observed = self.nodes[node.index()].queues.report(thresholds, self.now);
        let mut agent = af.agent;
        agent.record_arrival(node, self.now, observed, self.params.patrol_history_cap);
        let ctx = agent.probe_ctx.as_mut().expect("probe carries context");
        ctx.path_so_far.push(node);

        let agent_id = agent.agent_id;
        if node == ctx.destination {
            let outcome = measure_path_rate(ctx, self.now).ok();
            self.resolve_probe(txn_id, agent_id, outcome);
            return;
        }

        let step = {
            let nodes = &self.nodes;
            probe_advance(&agent, &self.topo, |at, dst| {
                nodes[at.index()].routing_table.next_hop(dst)
            })
        };
        match step {
            Ok(ProbeStep::Next(hop)) => {
                let size = self.params.probe_size_bits;
                let frame = Frame::Agent(AgentFrame {
                    agent,
                    to: hop,
                    size_bits: size,
                    txn: Some(txn_id),
                });
                if self.send_control_frame(node, hop, frame).is_err() {
                    self.resolve_probe(txn_id, agent_id, None);
                }
            }
            Ok(ProbeStep::Arrived) => unreachable!("destination handled above"),
            Err(_) => self.resolve_probe(txn_id, agent_id, None),
        }
    }

    fn resolve_probe(
        &mut self,
        txn_id: usize,
        agent: AgentId,
        result: Option<crate::agent::ProbeResult>,
    ) {
        let txn = &mut self.txns[txn_id];
        if txn.finalized || !txn.outstanding.remove(&agent) {
            return;
        }
        if let Some(r) = result {
            txn.results.push(r);
        }
        self.maybe_finalize(txn_id);
    }

    fn maybe_finalize(&mut self, txn_id: usize) {
        let txn = &self.txns[txn_id];
        if txn.finalized || !txn.outstanding.is_empty() {
            return;
        }
        let txn = &mut self.txns[txn_id];
        txn.finalized = true;
        let winner = select_path(&txn.results).ok().cloned();
        let record = RerouteRecord {
            at_s: self.now.as_secs_f64(),
            detector: self.topo.name(txn.detector).to_string(),
            destination: self.topo.name(txn.destination).to_string(),
            probes: txn.probes,
            results: txn.results.len(),
            winner_path: winner.as_ref().map(|w| {
                w.path.iter().map(|&n| self.topo.name(n).to_string()).collect()
            }),
            winner_rate_bps: winner.as_ref().map(|w| w.data_rate_bps),
            installed: false,
        };
        txn.log_idx = self.reroute_log.len();
        let report_winner = txn.report_winner;
        self.reroute_log.push(record);

        if let (Some(winner), true) = (winner, report_winner) {
            let reverse_path: Vec<NodeId> = winner.path.iter().rev().copied().collect();
            let frame = ReportFrame {
                txn: txn_id,
                winner,
                reverse_path,
                pos: 0,
                size_bits: self.params.control_frame_bits,
            };
            let at = frame.reverse_path[0];
            self.handle_report_arrival(at, frame);
        }
    }

    fn handle_report_arrival(&mut self, node: NodeId, mut frame: ReportFrame) {
        debug_assert_eq!(frame.reverse_path.get(frame.pos), Some(&node));
        if frame.pos + 1 == frame.reverse_path.len() {
            // back at the source: commit the winner unless the path went stale
            let log_idx = self.txns[frame.txn].log_idx;
            if install_path(&frame.winner, self.now, &self.topo, &mut self.nodes).is_ok() {
                self.reroutes_installed += 1;
                self.reroute_log[log_idx].installed = true;
                for &n in frame.winner.path.clone().iter() {
                    self.service_sweep(n);
                }
            }
            return;
        }
        let next = frame.reverse_path[frame.pos + 1];
        frame.pos += 1;
        let size = frame.size_bits;
        let _ = self.send_control_frame(node, next, Frame::Report(ReportFrame { size_bits: size, ..frame }));
        // a refused or dead hop loses the report; the old route stays
    }

    /// Queue a control frame at `from` for the link to `to`. Hands the frame
    /// back if the link is gone or the queue refuses it.
    #[allow(clippy::result_large_err)]
    fn send_control_frame(&mut self, from: NodeId, to: NodeId, frame: Frame) -> Result<(), Frame> {
        let Some(link_idx) = self.topo.link_index(from, to) else {
            return Err(frame);
        };
        if !self.topo.link(link_idx).up {
            return Err(frame);
        }
        match self.nodes[from.index()].queues.enqueue(frame.class(), frame) {
            Err(f) => Err(f),
            Ok(transition) => {
                self.note_transition(from, transition);
                self.service_next(from, link_idx);
                Ok(())
            }
        }
    }

    // ----- topology events ----------------------------------------------

    fn handle_link_event(&mut self, index: usize) {
        let ev = self.topo.events[index].clone();
        self.topo.apply_event(&ev);

        match self.mode {
            Mode::Baseline => {
                // non-adaptive: recompute on topology change, never on load
                let tables = baseline_route(&self.topo, self.now);
                for (state, table) in self.nodes.iter_mut().zip(tables) {
                    state.routing_table = table;
                }
            }
            Mode::Agent => {
                for id in self.topo.node_ids() {
                    let topo = &self.topo;
                    self.nodes[id.index()]
                        .routing_table
                        .retain_next_hops(|hop| topo.live_link(id, hop).is_some());
                }
            }
        }

        // views may only reference current neighbors
        for id in self.topo.node_ids() {
            let live: Vec<NodeId> = self.topo.live_neighbors(id).collect();
            self.nodes[id.index()]
                .neighbor_views
                .retain(|n, _| live.contains(n));
        }

        // strand sweep: queued data with no route drops as unroutable;
        // control frames whose target link died are returned to their owners
        let mut orphans: Vec<(NodeId, Frame)> = Vec::new();
        for id in self.topo.node_ids() {
            let (removed, emptied) = {
                let topo = &self.topo;
                let state = &mut self.nodes[id.index()];
                let table = &state.routing_table;
                state.queues.retain(|_, frame| match frame {
                    Frame::Data(p) => table.get(p.dst).is_some(),
                    Frame::Agent(a) => topo.live_link(id, a.to).is_some(),
                    Frame::Report(r) => r
                        .reverse_path
                        .get(r.pos)
                        .map(|&n| topo.live_link(id, n).is_some())
                        .unwrap_or(false),
                })
            };
            if emptied && self.mode == Mode::Agent && !self.quiet {
                self.propagate_now(id);
            }
            orphans.extend(removed.into_iter().map(|(_, f)| (id, f)));
        }
        for (at, frame) in orphans {
            match frame {
                Frame::Data(p) => self.flows[p.flow].dropped_noroute += 1,
                Frame::Agent(af) => match af.agent.mode {
                    AgentMode::Patrol => {
                        // failed migration; the agent never left
                        let agent_id = af.agent.agent_id;
                        debug_assert_eq!(af.agent.location, at);
                        self.resident_agents.insert(agent_id, af.agent);
                        self.schedule(
                            self.now + self.params.patrol_step_ns,
                            EventKind::AgentStep { agent: agent_id },
                        );
                    }
                    AgentMode::Probe => {
                        let txn = af.txn.expect("probe frames carry their transaction");
                        self.resolve_probe(txn, af.agent.agent_id, None);
                    }
                },
                Frame::Report(_) => {} // lost with the link; old route stays
            }
        }

        let nodes: Vec<NodeId> = self.topo.node_ids().collect();
        for v in nodes {
            self.service_sweep(v);
        }
    }

    // ----- metrics --------------------------------------------------------

    fn queued_data_per_flow(&self) -> Vec<u64> {
        let mut queued = vec![0u64; self.flows.len()];
        for state in &self.nodes {
            for (_, frame) in state.queues.iter() {
                if let Frame::Data(p) = frame {
                    queued[p.flow] += 1;
                }
            }
        }
        queued
    }

    fn sample_rows(&self) -> Vec<SampleRow> {
        self.flows
            .iter()
            .enumerate()
            .map(|(flow, fs)| SampleRow {
                flow,
                sent: fs.sent,
                delivered: fs.delivered,
                dropped_queue: fs.dropped_queue,
                dropped_noroute: fs.dropped_noroute,
            })
            .collect()
    }

    fn take_sample(&mut self) {
        let sample = Sample {
            at_s: self.now.as_secs_f64(),
            flows: self.sample_rows(),
            control_bits: self.control_bits,
            total_bits: self.control_bits + self.data_bits,
            reroutes: self.reroutes_installed,
        };
        self.samples.push(sample);
    }

    /// Aggregate the run into its report. Valid once `step` returns false.
    pub fn collect_metrics(&self) -> Metrics {
        let queued = self.queued_data_per_flow();
        let duration_s = self.duration.as_secs_f64();

        let flows: Vec<FlowMetrics> = self
            .flows
            .iter()
            .enumerate()
            .map(|(flow, fs)| {
                let in_flight = queued[flow] + fs.in_transit;
                debug_assert_eq!(
                    fs.sent,
                    fs.delivered + fs.dropped_queue + fs.dropped_noroute + in_flight,
                    "conservation violated for flow {flow}"
                );
                let mut delays = fs.delays_ns.clone();
                delays.sort_unstable();
                let active_ns = fs.spec.stop.min(self.duration).since(fs.spec.start);
                let goodput_bps = if active_ns > 0 {
                    fs.delivered_bits as f64 / (active_ns as f64 / 1e9)
                } else {
                    0.0
                };
                FlowMetrics {
                    flow,
                    sent: fs.sent,
                    delivered: fs.delivered,
                    dropped_queue: fs.dropped_queue,
                    dropped_noroute: fs.dropped_noroute,
                    in_flight,
                    loss_rate: loss_rate(fs.sent, fs.dropped_queue + fs.dropped_noroute),
                    mean_delay_ms: mean_ns(&delays).map(ns_to_ms),
                    p95_delay_ms: nearest_rank(&delays, 95.0).map(|d| ns_to_ms(d as f64)),
                    goodput_bps,
                }
            })
            .collect();

        let mut all_delays: Vec<u64> = self.flows.iter().flat_map(|f| f.delays_ns.iter().copied()).collect();
        all_delays.sort_unstable();
        let sent: u64 = flows.iter().map(|f| f.sent).sum();
        let delivered: u64 = flows.iter().map(|f| f.delivered).sum();
        let dropped_queue: u64 = flows.iter().map(|f| f.dropped_queue).sum();
        let dropped_noroute: u64 = flows.iter().map(|f| f.dropped_noroute).sum();
        let delivered_bits: u64 = self.flows.iter().map(|f| f.delivered_bits).sum();
        let total = RunTotals {
            sent,
            delivered,
            dropped_queue,
            dropped_noroute,
            in_flight: flows.iter().map(|f| f.in_flight).sum(),
            loss_rate: loss_rate(sent, dropped_queue + dropped_noroute),
            mean_delay_ms: mean_ns(&all_delays).map(ns_to_ms),
            p95_delay_ms: nearest_rank(&all_delays, 95.0).map(|d| ns_to_ms(d as f64)),
            goodput_bps: if duration_s > 0.0 {
                delivered_bits as f64 / duration_s
            } else {
                0.0
            },
        };

        let total_bits = self.control_bits + self.data_bits;
        let mut samples = self.samples.clone();
        let final_needed = samples
            .last()
            .map(|s| s.at_s + 1e-9 < duration_s)
            .unwrap_or(true);
        if final_needed && !self.quiet {
            samples.push(Sample {
                at_s: duration_s,
                flows: self.sample_rows(),
                control_bits: self.control_bits,
                total_bits,
                reroutes: self.reroutes_installed,
            });
        }

        Metrics {
            duration_s,
            flows,
            total,
            control_bits_sent: self.control_bits,
            data_bits_sent: self.data_bits,
            agent_overhead_ratio: if total_bits > 0 {
                self.control_bits as f64 / total_bits as f64
            } else {
                0.0
            },
            reroutes: self.reroutes_installed,
            samples,
            reroute_log: self.reroute_log.clone(),
        }
    }
}

fn loss_rate(sent: u64, dropped: u64) -> f64 {
    if sent == 0 {
        0.0
    } else {
        dropped as f64 / sent as f64
    }
}

/// Named substream of the master seed: adding a consumer never perturbs the
/// draws of another.
fn substream(master: u64, label: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(label.as_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

/// Shortest live path by hop count, ties by ascending id; None if unreachable.
fn greedy_shortest_path(topo: &Topology, from: NodeId, to: NodeId) -> Option<Vec<NodeId>> {
    let dist = topo.hop_distances_to(to);
    if dist[from.index()] == u32::MAX {
        return None;
    }
    let mut path = vec![from];
    let mut cur = from;
    while cur != to {
        cur = topo
            .live_neighbors(cur)
            .find(|n| dist[n.index()] + 1 == dist[cur.index()])?;
        path.push(cur);
    }
    Some(path)
}

/// Measure one explicit path with a real probe through an otherwise idle
/// network: tables are seeded along the path, a single probe walks it, and
/// its ProbeResult is returned.
pub fn probe_path_idle(
    topo: &Topology,
    path: &[NodeId],
    params: &Params,
) -> Result<crate::agent::ProbeResult, PathError> {
    // validates length and liveness of every hop
    crate::net::bottleneck_rate(path, topo)?;

    let scenario = Scenario {
        name: "idle-probe".to_string(),
        duration: SimTime(u64::MAX / 4),
        topology: topo.clone(),
        flows: Vec::new(),
        params: params.clone(),
    };
    let mut sim = Simulator::new_inner(&scenario, Mode::Agent, 0, true);
    let destination = *path.last().expect("path has nodes");
    for w in path.windows(2) {
        sim.nodes[w[0].index()].routing_table.install(
            w[0],
            destination,
            RouteEntry {
                next_hop: w[1],
                est_path_rate: 1,
                congested: false,
                updated_at: SimTime::ZERO,
            },
        );
    }

    let agent_id = AgentId(sim.next_agent_id + 1);
    sim.next_agent_id += 1;
    let agent = MobileAgent {
        agent_id,
        mode: AgentMode::Probe,
        home: path[0],
        location: path[0],
        history: Vec::new(),
        lineage: None,
        probe_ctx: Some(ProbeContext {
            source: path[0],
            destination,
            divergence_node: path[0],
            path_so_far: vec![path[0]],
            probe_size_bits: params.probe_size_bits,
            injected_at: SimTime::ZERO,
        }),
    };
    sim.txns.push(Transaction {
        detector: path[0],
        destination,
        probes: 1,
        outstanding: BTreeSet::from([agent_id]),
        results: Vec::new(),
        finalized: false,
        report_winner: false,
        log_idx: usize::MAX,
    });
    let frame = Frame::Agent(AgentFrame {
        agent,
        to: path[1],
        size_bits: params.probe_size_bits,
        txn: Some(0),
    });
    assert!(
        sim.send_control_frame(path[0], path[1], frame).is_ok(),
        "idle queues accept the probe"
    );

    while !sim.txns[0].finalized && sim.step() {}
    Ok(sim.txns[0]
        .results
        .first()
        .cloned()
        .expect("a probe on a validated idle path arrives"))
}
