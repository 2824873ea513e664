//! Scenario files: the reproducibility boundary.
//!
//! A scenario is a single TOML document with top-level keys exactly
//! `{name, duration_s, nodes, links, flows, events?, params?}`. Unknown keys
//! are rejected so fixtures cannot silently drift. Units are explicit in
//! field names (`rate_bps`, `prop_delay_ns`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::{LevelThresholds, LinkAction, LinkEvent, NodeId, Topology, TopologyError, TrafficClass};
use crate::time::SimTime;

/// A constant-bit-rate traffic source.
#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub src: NodeId,
    pub dst: NodeId,
    pub class: TrafficClass,
    pub packet_size_bits: u64,
    pub rate_bps: u64,
    pub start: SimTime,
    pub stop: SimTime,
}

impl Flow {
    /// Nanoseconds between packet emissions.
    pub fn interval_ns(&self) -> u64 {
        crate::time::transmission_ns(self.packet_size_bits, self.rate_bps)
    }
}

/// Protocol and engine parameters. Every field has a default, so scenario
/// files only spell out what they change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    /// Per-class queue capacity, in packets.
    pub queue_capacity_pkts: usize,
    /// Occupancy at or above which a queue is Medium.
    pub medium_occupancy: f64,
    /// Occupancy at or above which a queue is High.
    pub high_occupancy: f64,
    /// Payload carried by probe clones, per hop.
    pub probe_size_bits: u64,
    /// Size of patrol-migration and winner-report frames.
    pub control_frame_bits: u64,
    /// Period of the congestion broadcast to neighbors.
    pub propagation_interval_ns: u64,
    /// Dwell time of a patrol agent between migrations.
    pub patrol_step_ns: u64,
    /// Consecutive High reports needed before a reroute fires.
    pub high_streak_to_reroute: u32,
    /// Quiet period per (detector, destination) after a reroute attempt.
    pub reroute_cooldown_ns: u64,
    /// A probe older than this factor times its idle-network delay is failed.
    pub probe_timeout_factor: u64,
    /// Walk history kept per patrol agent.
    pub patrol_history_cap: usize,
    /// Hop budget per packet; exceeding it drops the packet as unroutable.
    pub max_hops: u32,
    /// Period of cumulative metrics snapshots.
    pub sample_interval_ns: u64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            queue_capacity_pkts: 50,
            medium_occupancy: 0.5,
            high_occupancy: 0.8,
            probe_size_bits: 8_000,
            control_frame_bits: 1_000,
            propagation_interval_ns: 100_000_000,
            patrol_step_ns: 10_000_000,
            high_streak_to_reroute: 2,
            reroute_cooldown_ns: 2_000_000_000,
            probe_timeout_factor: 10,
            patrol_history_cap: 64,
            max_hops: 32,
            sample_interval_ns: 1_000_000_000,
        }
    }
}

impl Params {
    pub fn thresholds(&self) -> LevelThresholds {
        LevelThresholds {
            medium: self.medium_occupancy,
            high: self.high_occupancy,
        }
    }
}

/// A fully validated scenario: the world, the offered traffic, and the knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub duration: SimTime,
    pub topology: Topology,
    pub flows: Vec<Flow>,
    pub params: Params,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("validation error: {0}")]
    Validation(#[from] ValidationError),
}

#[derive(Debug, Error, PartialEq)]
pub enum ValidationError {
    #[error("{context}: unknown node `{name}`")]
    UnknownNode { context: String, name: String },
    #[error("{0}")]
    Topology(#[from] TopologyError),
    #[error("duration_s must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("flows[{index}].{field} must be positive")]
    NonPositiveFlowField { index: usize, field: &'static str },
    #[error("flows[{index}]: start_s must precede stop_s")]
    StartAfterStop { index: usize },
    #[error("flows[{index}]: src and dst are both `{name}`")]
    FlowToSelf { index: usize, name: String },
    #[error("events[{index}]: no link between `{a}` and `{b}`")]
    EventUnknownLink { index: usize, a: String, b: String },
    #[error("events[{index}]: action `set_rate` needs a positive rate_bps")]
    EventMissingRate { index: usize },
    #[error("events[{index}]: unknown action `{action}`")]
    EventUnknownAction { index: usize, action: String },
    #[error("params.{field} must be positive")]
    NonPositiveParam { field: &'static str },
    #[error("params: occupancy thresholds need 0 < medium_occupancy <= high_occupancy <= 1")]
    BadThresholds,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    name: String,
    duration_s: f64,
    nodes: Vec<String>,
    links: Vec<LinkDoc>,
    flows: Vec<FlowDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    events: Vec<EventDoc>,
    #[serde(default)]
    params: Params,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkDoc {
    a: String,
    b: String,
    rate_bps: u64,
    #[serde(default)]
    prop_delay_ns: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowDoc {
    src: String,
    dst: String,
    class: TrafficClass,
    packet_size_bits: u64,
    rate_bps: u64,
    start_s: f64,
    stop_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventDoc {
    at_s: f64,
    a: String,
    b: String,
    action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rate_bps: Option<u64>,
}

fn validate_params(p: &Params) -> Result<(), ValidationError> {
    macro_rules! positive {
        ($($field:ident),*) => {$(
            if p.$field == 0 {
                return Err(ValidationError::NonPositiveParam { field: stringify!($field) });
            }
        )*};
    }
    positive!(
        queue_capacity_pkts,
        probe_size_bits,
        control_frame_bits,
        propagation_interval_ns,
        patrol_step_ns,
        high_streak_to_reroute,
        probe_timeout_factor,
        patrol_history_cap,
        max_hops,
        sample_interval_ns
    );
    if !(p.medium_occupancy > 0.0
        && p.medium_occupancy <= p.high_occupancy
        && p.high_occupancy <= 1.0)
    {
        return Err(ValidationError::BadThresholds);
    }
    Ok(())
}

fn build(doc: ScenarioDoc) -> Result<Scenario, ValidationError> {
    if doc.duration_s <= 0.0 || !doc.duration_s.is_finite() {
        return Err(ValidationError::NonPositiveDuration(doc.duration_s));
    }
    validate_params(&doc.params)?;

    let link_tuples: Vec<(String, String, u64, u64)> = doc
        .links
        .iter()
        .map(|l| (l.a.clone(), l.b.clone(), l.rate_bps, l.prop_delay_ns))
        .collect();
    let mut topology = Topology::new(&doc.nodes, &link_tuples)?;

    for (index, ev) in doc.events.iter().enumerate() {
        let a = topology.id_of(&ev.a).ok_or_else(|| ValidationError::UnknownNode {
            context: format!("events[{index}].a"),
            name: ev.a.clone(),
        })?;
        let b = topology.id_of(&ev.b).ok_or_else(|| ValidationError::UnknownNode {
            context: format!("events[{index}].b"),
            name: ev.b.clone(),
        })?;
        if topology.link_index(a, b).is_none() {
            return Err(ValidationError::EventUnknownLink {
                index,
                a: ev.a.clone(),
                b: ev.b.clone(),
            });
        }
        let action = match ev.action.as_str() {
            "up" => LinkAction::Up,
            "down" => LinkAction::Down,
            "set_rate" => match ev.rate_bps {
                Some(r) if r > 0 => LinkAction::SetRate(r),
                _ => return Err(ValidationError::EventMissingRate { index }),
            },
            other => {
                return Err(ValidationError::EventUnknownAction {
                    index,
                    action: other.to_string(),
                })
            }
        };
        topology.events.push(LinkEvent {
            at: SimTime::from_secs_f64(ev.at_s),
            a,
            b,
            action,
        });
    }

    let mut flows = Vec::with_capacity(doc.flows.len());
    for (index, f) in doc.flows.iter().enumerate() {
        let src = topology.id_of(&f.src).ok_or_else(|| ValidationError::UnknownNode {
            context: format!("flows[{index}].src"),
            name: f.src.clone(),
        })?;
        let dst = topology.id_of(&f.dst).ok_or_else(|| ValidationError::UnknownNode {
            context: format!("flows[{index}].dst"),
            name: f.dst.clone(),
        })?;
        if src == dst {
            return Err(ValidationError::FlowToSelf {
                index,
                name: f.src.clone(),
            });
        }
        if f.rate_bps == 0 {
            return Err(ValidationError::NonPositiveFlowField {
                index,
                field: "rate_bps",
            });
        }
        if f.packet_size_bits == 0 {
            return Err(ValidationError::NonPositiveFlowField {
                index,
                field: "packet_size_bits",
            });
        }
        if f.start_s >= f.stop_s || f.start_s < 0.0 {
            return Err(ValidationError::StartAfterStop { index });
        }
        flows.push(Flow {
            src,
            dst,
            class: f.class,
            packet_size_bits: f.packet_size_bits,
            rate_bps: f.rate_bps,
            start: SimTime::from_secs_f64(f.start_s),
            stop: SimTime::from_secs_f64(f.stop_s),
        });
    }

    Ok(Scenario {
        name: doc.name,
        duration: SimTime::from_secs_f64(doc.duration_s),
        topology,
        flows,
        params: doc.params,
    })
}

/// Parse and validate a scenario document. Omitted parameters take their
/// documented defaults.
pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let doc: ScenarioDoc = toml::from_str(text)?;
    Ok(build(doc)?)
}

impl Scenario {
    fn to_doc(&self) -> ScenarioDoc {
        let topo = &self.topology;
        ScenarioDoc {
            name: self.name.clone(),
            duration_s: self.duration.as_secs_f64(),
            nodes: topo.node_ids().map(|id| topo.name(id).to_string()).collect(),
            links: topo
                .links()
                .iter()
                .map(|l| LinkDoc {
                    a: topo.name(l.a).to_string(),
                    b: topo.name(l.b).to_string(),
                    rate_bps: l.rate_bps,
                    prop_delay_ns: l.prop_delay_ns,
                })
                .collect(),
            flows: self
                .flows
                .iter()
                .map(|f| FlowDoc {
                    src: topo.name(f.src).to_string(),
                    dst: topo.name(f.dst).to_string(),
                    class: f.class,
                    packet_size_bits: f.packet_size_bits,
                    rate_bps: f.rate_bps,
                    start_s: f.start.as_secs_f64(),
                    stop_s: f.stop.as_secs_f64(),
                })
                .collect(),
            events: topo
                .events
                .iter()
                .map(|ev| {
                    let (action, rate_bps) = match ev.action {
                        LinkAction::Up => ("up", None),
                        LinkAction::Down => ("down", None),
                        LinkAction::SetRate(r) => ("set_rate", Some(r)),
                    };
                    EventDoc {
                        at_s: ev.at.as_secs_f64(),
                        a: topo.name(ev.a).to_string(),
                        b: topo.name(ev.b).to_string(),
                        action: action.to_string(),
                        rate_bps,
                    }
                })
                .collect(),
            params: self.params.clone(),
        }
    }

    /// Serialize back to the scenario document format.
    /// `load_scenario(s.serialize())` reproduces `s` exactly.
    pub fn serialize(&self) -> String {
        toml::to_string(&self.to_doc()).expect("scenario serializes to TOML")
    }

    /// Copy of this scenario with every flow's offered rate scaled.
    pub fn with_offered_load(&self, multiplier: f64) -> Scenario {
        let mut out = self.clone();
        for f in &mut out.flows {
            f.rate_bps = ((f.rate_bps as f64 * multiplier).round() as u64).max(1);
        }
        out
    }
}
