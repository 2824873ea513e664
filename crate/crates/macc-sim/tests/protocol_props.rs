//! Property tests of the protocol and engine invariants.

use proptest::prelude::*;

use macc_sim::agent::{patrol_step, select_path, AgentId, MobileAgent, ProbeResult};
use macc_sim::engine::probe_path_idle;
use macc_sim::net::{bottleneck_rate, detect_mismatch, NodeId, Topology};
use macc_sim::scenario::{load_scenario, Flow, Params, Scenario};
use macc_sim::SimTime;

const RATE_SET: [u64; 4] = [1_000_000, 2_000_000, 5_500_000, 11_000_000];

fn chain(rates: &[u64], props: &[u64]) -> (Topology, Vec<NodeId>) {
    let names: Vec<String> = (0..=rates.len()).map(|i| format!("N{i:02}")).collect();
    let links: Vec<(String, String, u64, u64)> = rates
        .iter()
        .zip(props)
        .enumerate()
        .map(|(i, (&r, &p))| (names[i].clone(), names[i + 1].clone(), r, p))
        .collect();
    let topo = Topology::new(&names, &links).expect("chain builds");
    let path = names.iter().map(|n| topo.id_of(n).unwrap()).collect();
    (topo, path)
}

fn rate_strategy() -> impl Strategy<Value = u64> {
    prop::sample::select(RATE_SET.to_vec())
}

proptest! {
    /// bottleneck_rate equals a brute-force minimum on random graphs.
    #[test]
    fn bottleneck_matches_brute_force(
        rates in prop::collection::vec(rate_strategy(), 1..6),
    ) {
        let props = vec![0; rates.len()];
        let (topo, path) = chain(&rates, &props);
        let got = bottleneck_rate(&path, &topo).unwrap();
        let expect = *rates.iter().min().unwrap();
        prop_assert_eq!(got, expect);
    }

    /// detect_mismatch is empty exactly when hop rates never decrease below
    /// an earlier rate.
    #[test]
    fn mismatch_empty_iff_nondecreasing(
        rates in prop::collection::vec(rate_strategy(), 2..6),
    ) {
        let props = vec![0; rates.len()];
        let (topo, path) = chain(&rates, &props);
        let flagged = detect_mismatch(&path, &topo).unwrap();
        let nondecreasing = rates.windows(2).all(|w| w[0] <= w[1]);
        prop_assert_eq!(flagged.is_empty(), nondecreasing, "rates {:?}", rates);
    }

    /// A probe never measures more than the path bottleneck; a single idle
    /// hop comes within rounding of it.
    #[test]
    fn measured_rate_below_bottleneck(
        hops in prop::collection::vec((rate_strategy(), 0u64..5_000), 1..6),
    ) {
        let rates: Vec<u64> = hops.iter().map(|&(r, _)| r).collect();
        let props: Vec<u64> = hops.iter().map(|&(_, p)| p).collect();
        let (topo, path) = chain(&rates, &props);
        let result = probe_path_idle(&topo, &path, &Params::default()).unwrap();
        let bottleneck = bottleneck_rate(&path, &topo).unwrap() as f64;
        prop_assert!(result.data_rate_bps <= bottleneck);
        if rates.len() == 1 && props[0] == 0 {
            prop_assert!((result.data_rate_bps - bottleneck).abs() / bottleneck < 1e-3);
        } else if rates.len() > 1 {
            prop_assert!(result.data_rate_bps < bottleneck);
        }
    }

    /// select_path is invariant under input order.
    #[test]
    fn selection_is_order_invariant(
        rates in prop::collection::vec(1.0e5f64..1.2e7, 1..6),
        shuffle in prop::collection::vec(any::<prop::sample::Index>(), 8),
    ) {
        let results: Vec<ProbeResult> = rates
            .iter()
            .enumerate()
            .map(|(i, &r)| ProbeResult {
                path: vec![NodeId(0), NodeId(i as u32 + 1), NodeId(99)],
                channel_delay_ns: 1 + i as u64,
                data_rate_bps: r,
            })
            .collect();
        let winner = select_path(&results).unwrap().clone();
        let mut shuffled = results.clone();
        for idx in shuffle {
            let j = idx.index(shuffled.len());
            shuffled.swap(0, j);
        }
        prop_assert_eq!(select_path(&shuffled).unwrap(), &winner);
    }
}

/// bottleneck_rate equals the brute-force hop minimum on every simple path
/// of length <= 6 over random 8-node graphs.
#[test]
fn bottleneck_matches_brute_force_on_random_graphs() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10 {
        let names: Vec<String> = (0..8).map(|i| format!("G{i}")).collect();
        let mut links = Vec::new();
        for i in 0..8usize {
            for j in (i + 1)..8 {
                if j == i + 1 || rng.random_bool(0.25) {
                    links.push((
                        names[i].clone(),
                        names[j].clone(),
                        RATE_SET[rng.random_range(0..4)],
                        0,
                    ));
                }
            }
        }
        let topo = Topology::new(&names, &links).unwrap();

        fn walk(topo: &Topology, path: &mut Vec<NodeId>, checked: &mut u64) {
            if path.len() >= 2 {
                let hop_min = path
                    .windows(2)
                    .map(|w| topo.live_link(w[0], w[1]).unwrap().rate_bps)
                    .min()
                    .unwrap();
                assert_eq!(bottleneck_rate(path, topo).unwrap(), hop_min);
                *checked += 1;
            }
            if path.len() > 6 {
                return;
            }
            let last = *path.last().unwrap();
            let neighbors: Vec<NodeId> = topo.live_neighbors(last).collect();
            for n in neighbors {
                if !path.contains(&n) {
                    path.push(n);
                    walk(topo, path, checked);
                    path.pop();
                }
            }
        }
        let mut checked = 0;
        for start in topo.node_ids() {
            walk(&topo, &mut vec![start], &mut checked);
        }
        assert!(checked > 0);
    }
}

/// Long-run patrol walks visit every node of a connected graph: cover
/// within 10 000 steps on fixtures up to 12 nodes, for 100 seeds.
#[test]
fn patrol_walks_cover_connected_graphs() {
    use rand::SeedableRng;

    // ring of 12 with two chords, and the canonical 9-node mesh
    let ring_names: Vec<String> = (0..12).map(|i| format!("R{i:02}")).collect();
    let mut ring_links: Vec<(String, String, u64, u64)> = (0..12)
        .map(|i| (ring_names[i].clone(), ring_names[(i + 1) % 12].clone(), 1_000_000, 0))
        .collect();
    ring_links.push((ring_names[0].clone(), ring_names[6].clone(), 1_000_000, 0));
    ring_links.push((ring_names[3].clone(), ring_names[9].clone(), 1_000_000, 0));
    let ring = Topology::new(&ring_names, &ring_links).unwrap();

    let canonical = load_scenario(&std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/scenarios/canonical.toml"
    )).unwrap())
    .unwrap()
    .topology;

    for topo in [&ring, &canonical] {
        for seed in 0..50u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut agent = MobileAgent::patrol(AgentId(1), NodeId(0));
            let mut visited = vec![false; topo.node_count()];
            visited[0] = true;
            let mut at = NodeId(0);
            let mut cover_step = None;
            for step in 1..=10_000u32 {
                let neighbors: Vec<NodeId> = topo.live_neighbors(at).collect();
                at = patrol_step(&agent, &neighbors, &mut rng).expect("connected");
                agent.location = at;
                visited[at.index()] = true;
                if visited.iter().all(|&v| v) {
                    cover_step = Some(step);
                    break;
                }
            }
            assert!(
                cover_step.is_some(),
                "seed {seed}: walk failed to cover {} nodes",
                topo.node_count()
            );
        }
    }
    println!("patrol cover property: every node visited within 10000 steps, 100 walks");
}

/// load_scenario(serialize(s)) reproduces s for generated scenarios.
#[test]
fn scenario_round_trip_holds_for_generated_scenarios() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    for _ in 0..50 {
        let n = rng.random_range(2..=7usize);
        let names: Vec<String> = (0..n).map(|i| format!("node-{i}")).collect();
        let mut links = Vec::new();
        for i in 0..n - 1 {
            links.push((
                names[i].clone(),
                names[i + 1].clone(),
                RATE_SET[rng.random_range(0..4)],
                rng.random_range(0..10_000u64),
            ));
        }
        let mut topology = Topology::new(&names, &links).unwrap();
        if rng.random_bool(0.5) {
            let l = topology.links()[rng.random_range(0..topology.links().len())].clone();
            topology.events.push(macc_sim::net::LinkEvent {
                at: SimTime(rng.random_range(1..2_000_000_000u64)),
                a: l.a,
                b: l.b,
                action: if rng.random_bool(0.5) {
                    macc_sim::net::LinkAction::Down
                } else {
                    macc_sim::net::LinkAction::SetRate(RATE_SET[rng.random_range(0..4)])
                },
            });
        }
        let flows = (0..rng.random_range(0..3usize))
            .map(|_| {
                let src = NodeId(rng.random_range(0..n as u32));
                let mut dst = NodeId(rng.random_range(0..n as u32));
                while dst == src {
                    dst = NodeId(rng.random_range(0..n as u32));
                }
                Flow {
                    src,
                    dst,
                    class: macc_sim::net::TrafficClass::Video,
                    packet_size_bits: rng.random_range(1..20u64) * 1_000,
                    rate_bps: RATE_SET[rng.random_range(0..4)] / 4,
                    start: SimTime(rng.random_range(0..500_000_000u64)),
                    stop: SimTime(rng.random_range(500_000_001..2_000_000_000u64)),
                }
            })
            .collect();
        let scenario = Scenario {
            name: format!("gen-{n}"),
            duration: SimTime(rng.random_range(1..3u64) * 1_000_000_000),
            topology,
            flows,
            params: Params::default(),
        };
        let reloaded = load_scenario(&scenario.serialize()).expect("serialized form loads");
        assert_eq!(scenario, reloaded);
    }
}
