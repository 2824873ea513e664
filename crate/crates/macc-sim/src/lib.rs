//! Deterministic discrete-event simulation of mobile-agent congestion
//! control in multi-rate ad-hoc networks.
//!
//! Mobile agents patrol the network as uniform random walkers, refreshing
//! routing tables with the congestion state they observed. When a node heads
//! a *mismatched* link — a slow link fed by faster upstream links — and its
//! queues stay high, it clones probe agents to its other neighbors. Each
//! probe walks one candidate path to the destination through the real
//! queues, rates the path by `data size / channel delay`, and the best rate
//! wins and is installed end to end. A congestion-blind shortest-hop router
//! serves as the baseline, so the protocol's effect on delay, loss, and
//! overhead is measurable.
//!
//! ## Examples
//!
//! Each major capability has a runnable example:
//!
//! ```text
//! cargo run -p macc-sim --example path_analysis       # bottleneck rate and mismatch detection
//! cargo run -p macc-sim --example patrol_walk         # uniform patrol steps and table refresh
//! cargo run -p macc-sim --example clone_probe_select  # the full clone/probe/select/install procedure
//! cargo run -p macc-sim --example agent_vs_baseline   # both routers on the canonical scenario
//! cargo run -p macc-sim --example load_sweep          # loss vs offered load for both routers
//! ```
//!
//! ## Library layout
//!
//! - [`net`] — topology, per-class drop-tail queues, congestion levels,
//!   bottleneck and mismatch analysis
//! - [`agent`] — patrol and probe agents, routing tables, the reroute
//!   procedure
//! - [`engine`] — the event loop, traffic, transmission, baseline router,
//!   metrics
//! - [`scenario`] — scenario documents (strict TOML schema)
//! - [`output`] — metrics records (JSON) and tables (CSV)
//! - [`cli`] — the `macc-sim` binary: run / compare / sweep / validate
//!
//! ## Determinism
//!
//! Time is integer nanoseconds, events are totally ordered by
//! (time, insertion sequence), and every random consumer draws from its own
//! seed-derived stream, so identical (scenario, mode, seed) triples produce
//! byte-identical metrics.

pub mod agent;
pub mod cli;
pub mod engine;
pub mod net;
pub mod output;
pub mod scenario;
pub mod time;

pub use engine::{probe_path_idle, run, Metrics, Mode, Simulator};
pub use scenario::{load_scenario, Scenario};
pub use time::SimTime;
