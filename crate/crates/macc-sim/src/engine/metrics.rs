//! Run accounting: throughput, delay, loss, and agent overhead.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Which router drives the run: the agent protocol or the congestion-blind
/// baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Agent,
    Baseline,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Agent => write!(f, "agent"),
            Mode::Baseline => write!(f, "baseline"),
        }
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "agent" => Ok(Mode::Agent),
            "baseline" => Ok(Mode::Baseline),
            other => Err(format!("unknown mode `{other}` (agent|baseline)")),
        }
    }
}

/// Per-flow outcome of a run. Delay fields are absent when nothing was
/// delivered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowMetrics {
    pub flow: usize,
    pub sent: u64,
    pub delivered: u64,
    pub dropped_queue: u64,
    pub dropped_noroute: u64,
    pub in_flight: u64,
    pub loss_rate: f64,
    pub mean_delay_ms: Option<f64>,
    pub p95_delay_ms: Option<f64>,
    pub goodput_bps: f64,
}

/// Whole-run aggregate over every flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTotals {
    pub sent: u64,
    pub delivered: u64,
    pub dropped_queue: u64,
    pub dropped_noroute: u64,
    pub in_flight: u64,
    pub loss_rate: f64,
    pub mean_delay_ms: Option<f64>,
    pub p95_delay_ms: Option<f64>,
    pub goodput_bps: f64,
}

/// Cumulative counters of one flow at a sample instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub flow: usize,
    pub sent: u64,
    pub delivered: u64,
    pub dropped_queue: u64,
    pub dropped_noroute: u64,
}

/// Periodic snapshot of cumulative counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub at_s: f64,
    pub flows: Vec<SampleRow>,
    pub control_bits: u64,
    pub total_bits: u64,
    pub reroutes: u64,
}

/// One clone-probe-select transaction, as observed by the engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerouteRecord {
    pub at_s: f64,
    pub detector: String,
    pub destination: String,
    pub probes: usize,
    pub results: usize,
    pub winner_path: Option<Vec<String>>,
    pub winner_rate_bps: Option<f64>,
    pub installed: bool,
}

/// Everything a run reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub duration_s: f64,
    pub flows: Vec<FlowMetrics>,
    pub total: RunTotals,
    pub control_bits_sent: u64,
    pub data_bits_sent: u64,
    /// Control bits over all bits put on links; zero when nothing moved.
    pub agent_overhead_ratio: f64,
    pub reroutes: u64,
    pub samples: Vec<Sample>,
    pub reroute_log: Vec<RerouteRecord>,
}

impl Metrics {
    /// Loss rate of `flow` between two instants, computed from the sample
    /// trail: drops over packets sent within the window. `None` when the
    /// flow sent nothing in the window.
    pub fn window_loss(&self, flow: usize, from_s: f64, to_s: f64) -> Option<f64> {
        let at = |t: f64| -> (u64, u64) {
            // latest sample at or before t; before the first sample all
            // counters are zero
            let mut acc = (0, 0);
            for s in &self.samples {
                if s.at_s > t + 1e-9 {
                    break;
                }
                if let Some(row) = s.flows.iter().find(|r| r.flow == flow) {
                    acc = (row.sent, row.dropped_queue + row.dropped_noroute);
                }
            }
            acc
        };
        let (sent_from, dropped_from) = at(from_s);
        let (sent_to, dropped_to) = at(to_s);
        let sent = sent_to.saturating_sub(sent_from);
        if sent == 0 {
            return None;
        }
        Some(dropped_to.saturating_sub(dropped_from) as f64 / sent as f64)
    }
}

/// Nearest-rank percentile over an ascending-sorted slice.
pub fn nearest_rank(sorted: &[u64], percentile: f64) -> Option<u64> {
    if sorted.is_empty() {
        return None;
    }
    debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
    let rank = ((percentile / 100.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

pub fn mean_ns(delays: &[u64]) -> Option<f64> {
    if delays.is_empty() {
        return None;
    }
    let sum: u128 = delays.iter().map(|&d| d as u128).sum();
    Some(sum as f64 / delays.len() as f64)
}

pub fn ns_to_ms(ns: f64) -> f64 {
    ns / 1_000_000.0
}
