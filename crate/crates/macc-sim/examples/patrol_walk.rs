//! Patrol agents: uniform neighbor selection and history-driven routing
//! table refresh.
//!
//! Run with: cargo run -p macc-sim --example patrol_walk

use macc_sim::agent::{patrol_step, update_routing_table, AgentId, MobileAgent, RoutingTable};
use macc_sim::net::Topology;
use macc_sim::time::SimTime;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    // star: X in the middle, five leaves
    let names: Vec<String> = ["A", "B", "C", "D", "E", "X"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let links: Vec<(String, String, u64, u64)> = ["A", "B", "C", "D", "E"]
        .iter()
        .map(|n| ("X".to_string(), n.to_string(), 2_000_000, 0))
        .collect();
    let topo = Topology::new(&names, &links).expect("star builds");
    let x = topo.id_of("X").unwrap();

    println!("=== Uniform patrol selection ===\n");
    let agent = MobileAgent::patrol(AgentId(1), x);
    let neighbors: Vec<_> = topo.live_neighbors(x).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut counts = vec![0u32; neighbors.len()];
    let draws = 30_000;
    for _ in 0..draws {
        let pick = patrol_step(&agent, &neighbors, &mut rng).expect("star has neighbors");
        let idx = neighbors.iter().position(|&n| n == pick).unwrap();
        counts[idx] += 1;
    }
    let expected = draws as f64 / neighbors.len() as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    for (n, c) in neighbors.iter().zip(&counts) {
        println!("  {}: {} picks ({:.2}%)", topo.name(*n), c, *c as f64 / draws as f64 * 100.0);
    }
    println!("  chi-square over {draws} draws: {chi2:.3} (df=4, 1% critical value 13.277)\n");

    println!("=== History-driven table refresh ===\n");
    // walk the agent A -> X and refresh X's table from its history
    let a = topo.id_of("A").unwrap();
    let mut walker = MobileAgent::patrol(AgentId(2), a);
    walker.record_arrival(a, SimTime(10), macc_sim::net::CongestionReport::idle(SimTime(10)), 64);
    walker.record_arrival(x, SimTime(20), macc_sim::net::CongestionReport::idle(SimTime(20)), 64);

    let mut table = RoutingTable::new();
    let changed = update_routing_table(&mut table, x, &walker, &topo);
    println!("  agent walked A -> X; entries written at X: {changed}");
    let entry = table.get(a).expect("route to A installed");
    println!(
        "  X's entry for A: next_hop={} est_rate={:.1} Mbps congested={}",
        topo.name(entry.next_hop),
        entry.est_path_rate as f64 / 1e6,
        entry.congested,
    );

    // a staler walker cannot overwrite it
    let mut stale = MobileAgent::patrol(AgentId(3), a);
    stale.record_arrival(a, SimTime(1), macc_sim::net::CongestionReport::idle(SimTime(1)), 64);
    stale.record_arrival(x, SimTime(2), macc_sim::net::CongestionReport::idle(SimTime(2)), 64);
    let changed = update_routing_table(&mut table, x, &stale, &topo);
    println!("  stale walker afterwards changed {changed} entries (freshness rule)");
}
