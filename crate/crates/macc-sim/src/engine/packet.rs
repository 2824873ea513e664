//! What travels through queues and over links: data packets, agent
//! migrations, and winner reports. Control frames ride at Voice priority.

use crate::agent::{MobileAgent, ProbeResult};
use crate::net::{NodeId, TrafficClass};
use crate::time::SimTime;

/// One classed traffic unit of a flow.
#[derive(Debug, Clone)]
pub struct Packet {
    pub id: u64,
    pub flow: usize,
    pub seq: u64,
    pub size_bits: u64,
    pub class: TrafficClass,
    pub created_at: SimTime,
    pub delivered_at: Option<SimTime>,
    pub src: NodeId,
    pub dst: NodeId,
    /// Nodes this packet has departed, oldest first.
    pub trace: Vec<NodeId>,
    pub hops: u32,
}

/// An agent value in transit across one link.
#[derive(Debug, Clone)]
pub struct AgentFrame {
    pub agent: MobileAgent,
    pub to: NodeId,
    pub size_bits: u64,
    /// Reroute transaction this probe belongs to; patrol frames carry none.
    pub txn: Option<usize>,
}

/// The winning probe result traveling back to the source for installation.
#[derive(Debug, Clone)]
pub struct ReportFrame {
    pub txn: usize,
    pub winner: ProbeResult,
    /// Winner path reversed: destination first, source last.
    pub reverse_path: Vec<NodeId>,
    /// Index in `reverse_path` of the node this frame is addressed to.
    pub pos: usize,
    pub size_bits: u64,
}

#[derive(Debug, Clone)]
pub enum Frame {
    Data(Packet),
    Agent(AgentFrame),
    Report(ReportFrame),
}

impl Frame {
    pub fn class(&self) -> TrafficClass {
        match self {
            Frame::Data(p) => p.class,
            Frame::Agent(_) | Frame::Report(_) => TrafficClass::Voice,
        }
    }

    pub fn size_bits(&self) -> u64 {
        match self {
            Frame::Data(p) => p.size_bits,
            Frame::Agent(a) => a.size_bits,
            Frame::Report(r) => r.size_bits,
        }
    }

    pub fn is_control(&self) -> bool {
        !matches!(self, Frame::Data(_))
    }
}
