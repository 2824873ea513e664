//! Path analysis over a topology: bottleneck rate and mismatched-rate
//! detection.
//!
//! A route is *mismatched* when a slower link follows faster ones: the node
//! heading the slow link receives traffic faster than it can forward it and
//! accumulates queue backlog.

use thiserror::Error;

use super::topology::{NodeId, Topology};

#[derive(Debug, Error, PartialEq)]
pub enum PathError {
    #[error("path needs at least two nodes, got {0}")]
    PathTooShort(usize),
    #[error("no live link between `{0}` and `{1}`")]
    MissingLink(String, String),
}

fn hop_rates(path: &[NodeId], topo: &Topology) -> Result<Vec<u64>, PathError> {
    if path.len() < 2 {
        return Err(PathError::PathTooShort(path.len()));
    }
    path.windows(2)
        .map(|w| {
            topo.live_link(w[0], w[1])
                .map(|l| l.rate_bps)
                .ok_or_else(|| {
                    PathError::MissingLink(
                        topo.name(w[0]).to_string(),
                        topo.name(w[1]).to_string(),
                    )
                })
        })
        .collect()
}

/// Minimum link rate along `path`: the upper bound on route throughput.
pub fn bottleneck_rate(path: &[NodeId], topo: &Topology) -> Result<u64, PathError> {
    let rates = hop_rates(path, topo)?;
    Ok(rates.into_iter().min().expect("path has at least one hop"))
}

/// Every interior node whose outgoing link is slower than some earlier link
/// on the path, in path order. Empty iff hop rates are non-decreasing.
pub fn detect_mismatch(path: &[NodeId], topo: &Topology) -> Result<Vec<NodeId>, PathError> {
    let rates = hop_rates(path, topo)?;
    let mut flagged = Vec::new();
    let mut prefix_max = rates[0];
    for (i, &rate) in rates.iter().enumerate().skip(1) {
        if rate < prefix_max {
            flagged.push(path[i]);
        }
        prefix_max = prefix_max.max(rate);
    }
    Ok(flagged)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Chain A-B-C-... with the given hop rates.
    fn chain(rates: &[u64]) -> (Topology, Vec<NodeId>) {
        let names: Vec<String> = (0..=rates.len())
            .map(|i| format!("{}", (b'A' + i as u8) as char))
            .collect();
        let links: Vec<(String, String, u64, u64)> = rates
            .iter()
            .enumerate()
            .map(|(i, &r)| (names[i].clone(), names[i + 1].clone(), r, 0))
            .collect();
        let topo = Topology::new(&names, &links).unwrap();
        let path = names.iter().map(|n| topo.id_of(n).unwrap()).collect();
        (topo, path)
    }

    const M: u64 = 1_000_000;

    #[test]
    fn bottleneck_single_link() {
        let (topo, path) = chain(&[11 * M]);
        assert_eq!(bottleneck_rate(&path, &topo).unwrap(), 11 * M);
    }

    #[test]
    fn bottleneck_is_minimum() {
        let (topo, path) = chain(&[11 * M, 5_500_000, 2 * M]);
        assert_eq!(bottleneck_rate(&path, &topo).unwrap(), 2 * M);
    }

    #[test]
    fn bottleneck_errors() {
        let (topo, path) = chain(&[11 * M, 2 * M]);
        assert_eq!(
            bottleneck_rate(&path[..1], &topo),
            Err(PathError::PathTooShort(1))
        );
        // A and C share no link
        let skip = vec![path[0], path[2]];
        assert_eq!(
            bottleneck_rate(&skip, &topo),
            Err(PathError::MissingLink("A".into(), "C".into()))
        );
    }

    #[test]
    fn mismatch_empty_for_nondecreasing() {
        let (topo, path) = chain(&[M, 2 * M, 11 * M]);
        assert_eq!(detect_mismatch(&path, &topo).unwrap(), vec![]);
    }

    #[test]
    fn mismatch_flags_every_slower_after_faster() {
        // 11 then 2 then 5.5: both interior heads flagged, in path order
        let (topo, path) = chain(&[11 * M, 2 * M, 5_500_000]);
        assert_eq!(
            detect_mismatch(&path, &topo).unwrap(),
            vec![path[1], path[2]]
        );
    }

    #[test]
    fn mismatch_brute_force_agreement() {
        // exhaustive rate assignments over short chains vs an independent
        // prefix-max comparator
        let rates = [M, 2 * M, 5_500_000, 11 * M];
        for &r1 in &rates {
            for &r2 in &rates {
                for &r3 in &rates {
                    let (topo, path) = chain(&[r1, r2, r3]);
                    let got = detect_mismatch(&path, &topo).unwrap();
                    let hop = [r1, r2, r3];
                    let mut expect = Vec::new();
                    for i in 1..hop.len() {
                        if hop[..i].iter().any(|&earlier| hop[i] < earlier) {
                            expect.push(path[i]);
                        }
                    }
                    assert_eq!(got, expect, "rates {:?}", hop);
                }
            }
        }
    }
}
