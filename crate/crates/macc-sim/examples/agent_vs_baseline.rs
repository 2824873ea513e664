//! Agent protocol vs congestion-blind baseline on the canonical scenario:
//! one BestEffort flow offering 4 Mbps into a route whose tail link carries
//! 1 Mbps.
//!
//! Run with: cargo run -p macc-sim --example agent_vs_baseline

use macc_sim::engine::{run, Metrics, Mode};
use macc_sim::scenario::load_scenario;

fn show(mode: Mode, m: &Metrics) {
    let f = &m.flows[0];
    println!("{mode}:");
    println!("  sent {} / delivered {} / dropped {} (queue) + {} (no route)",
        f.sent, f.delivered, f.dropped_queue, f.dropped_noroute);
    println!("  loss_rate          {:.4}", f.loss_rate);
    println!(
        "  mean / p95 delay   {:.3} / {:.3} ms",
        f.mean_delay_ms.unwrap_or(f64::NAN),
        f.p95_delay_ms.unwrap_or(f64::NAN)
    );
    println!("  goodput            {:.3} Mbps", f.goodput_bps / 1e6);
    println!("  agent overhead     {:.4}", m.agent_overhead_ratio);
    println!("  reroutes           {}", m.reroutes);
    if let Some(w) = m.window_loss(0, 10.0, 30.0) {
        println!("  loss over final 20 simulated seconds: {w:.4}");
    }
    println!();
}

fn main() {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/scenarios/canonical.toml"
    ))
    .expect("canonical scenario ships with the crate");
    let scenario = load_scenario(&text).expect("fixture is valid");

    println!(
        "=== `{}`: 4 Mbps offered over the S-B-D-F-H route (1 Mbps tail) ===\n",
        scenario.name
    );

    let seed = 0;
    let baseline = run(&scenario, Mode::Baseline, seed);
    let agent = run(&scenario, Mode::Agent, seed);
    show(Mode::Baseline, &baseline);
    show(Mode::Agent, &agent);

    println!(
        "goodput ratio (agent / baseline): {:.2}x",
        agent.total.goodput_bps / baseline.total.goodput_bps
    );
}
