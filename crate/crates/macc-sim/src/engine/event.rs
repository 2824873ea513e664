//! The event queue: a min-heap over (fire time, insertion sequence), so
//! simultaneous events run in the order they were scheduled and every run is
//! a total, reproducible order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::packet::Frame;
use crate::agent::AgentId;
use crate::net::NodeId;
use crate::time::SimTime;

/// How a frame reaches a node: off the wire, or fresh from the local
/// application layer (packet generation).
#[derive(Debug)]
pub enum Arrival {
    Wire(Frame),
    FromApp { flow: usize },
}

#[derive(Debug)]
pub enum EventKind {
    FlowStart { flow: usize },
    FlowStop { flow: usize },
    PacketArrival { node: NodeId, arrival: Arrival },
    TransmitDone { link: usize, dir: usize },
    AgentStep { agent: AgentId },
    CongestionBroadcast { node: NodeId },
    ProbeTimeout { txn: usize, agent: AgentId },
    LinkEvent { index: usize },
    MetricsSample,
}

#[derive(Debug)]
pub struct Event {
    pub at: SimTime,
    pub seq: u64,
    pub kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap, we want the earliest event
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> EventQueue {
        EventQueue::default()
    }

    pub fn push(&mut self, at: SimTime, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event { at, seq, kind });
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn peek_at(&self) -> Option<SimTime> {
        self.heap.peek().map(|e| e.at)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
