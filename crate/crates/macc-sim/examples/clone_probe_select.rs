//! The path-switching procedure end to end: candidate paths measured by
//! probes in an idle network, then the live run where node F detects the
//! mismatch, clones probes via E and G, and installs the winner.
//!
//! Run with: cargo run -p macc-sim --example clone_probe_select

use macc_sim::engine::{probe_path_idle, run, Mode};
use macc_sim::scenario::load_scenario;

fn main() {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/scenarios/canonical.toml"
    ))
    .expect("canonical scenario ships with the crate");
    let scenario = load_scenario(&text).expect("fixture is valid");
    let topo = &scenario.topology;

    println!("=== Candidate paths, measured by probes in an idle network ===\n");
    for names in [
        vec!["S", "B", "D", "F", "E", "H"],
        vec!["S", "B", "D", "F", "G", "H"],
    ] {
        let path: Vec<_> = names.iter().map(|n| topo.id_of(n).unwrap()).collect();
        let result = probe_path_idle(topo, &path, &scenario.params).expect("path is live");
        println!(
            "  {}: channel delay {:.3} ms -> {:.3} Mbps",
            names.join("-"),
            result.channel_delay_ns as f64 / 1e6,
            result.data_rate_bps / 1e6,
        );
    }

    println!("\n=== Live run: detection, cloning, selection, installation ===\n");
    let metrics = run(&scenario, Mode::Agent, 0);
    for r in &metrics.reroute_log {
        println!("  t={:.3}s detector={} destination={}", r.at_s, r.detector, r.destination);
        println!("    probes cloned: {} (one per eligible neighbor)", r.probes);
        println!("    results returned: {}", r.results);
        match (&r.winner_path, r.winner_rate_bps) {
            (Some(path), Some(rate)) => println!(
                "    winner: {} at {:.3} Mbps ({})",
                path.join("-"),
                rate / 1e6,
                if r.installed { "installed" } else { "not installed" },
            ),
            _ => println!("    every probe failed; kept the old route"),
        }
    }
    println!(
        "\n  flow outcome: loss_rate={:.4}, goodput={:.3} Mbps, reroutes={}",
        metrics.flows[0].loss_rate,
        metrics.flows[0].goodput_bps / 1e6,
        metrics.reroutes,
    );
}
