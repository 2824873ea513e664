//! Per-class drop-tail queues, congestion levels, and node priority.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

use crate::time::SimTime;

/// Traffic classes, ordered by delay sensitivity ascending.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum TrafficClass {
    Background,
    BestEffort,
    Video,
    Voice,
}

impl TrafficClass {
    pub const ALL: [TrafficClass; 4] = [
        TrafficClass::Background,
        TrafficClass::BestEffort,
        TrafficClass::Video,
        TrafficClass::Voice,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Priority weight: delay-sensitive classes weigh more.
    fn weight(self) -> u32 {
        match self {
            TrafficClass::Background => 1,
            TrafficClass::BestEffort => 2,
            TrafficClass::Video => 4,
            TrafficClass::Voice => 8,
        }
    }
}

/// Congestion bands derived from queue occupancy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CongestionLevel {
    Low,
    Medium,
    High,
}

impl CongestionLevel {
    fn value(self) -> u32 {
        self as u32
    }
}

/// Occupancy thresholds mapping a queue ratio onto a congestion band:
/// Low below `medium`, Medium in [`medium`, `high`), High at or above `high`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelThresholds {
    pub medium: f64,
    pub high: f64,
}

impl Default for LevelThresholds {
    fn default() -> Self {
        LevelThresholds {
            medium: 0.5,
            high: 0.8,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("occupancy {0} outside [0, 1]")]
pub struct DomainError(pub f64);

/// Map a queue occupancy ratio onto its congestion band.
pub fn congestion_level(
    occupancy: f64,
    thresholds: LevelThresholds,
) -> Result<CongestionLevel, DomainError> {
    if !(0.0..=1.0).contains(&occupancy) {
        return Err(DomainError(occupancy));
    }
    Ok(if occupancy < thresholds.medium {
        CongestionLevel::Low
    } else if occupancy < thresholds.high {
        CongestionLevel::Medium
    } else {
        CongestionLevel::High
    })
}

/// A node's congestion snapshot: per-class occupancy and band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongestionReport {
    pub occupancy: [f64; 4],
    pub level: [CongestionLevel; 4],
    pub measured_at: SimTime,
}

impl CongestionReport {
    pub fn idle(measured_at: SimTime) -> CongestionReport {
        CongestionReport {
            occupancy: [0.0; 4],
            level: [CongestionLevel::Low; 4],
            measured_at,
        }
    }

    pub fn level_of(&self, class: TrafficClass) -> CongestionLevel {
        self.level[class.index()]
    }

    pub fn any_high(&self) -> bool {
        self.level.contains(&CongestionLevel::High)
    }
}

/// Total-order priority score for receiving traffic: maximal when all queues
/// are empty, strictly decreasing as any class level rises, and penalizing
/// delay-sensitive congestion hardest. Higher score = preferred receiver.
pub fn node_priority(report: &CongestionReport) -> u32 {
    let max: u32 = TrafficClass::ALL
        .iter()
        .map(|c| c.weight() * CongestionLevel::High.value())
        .sum();
    let load: u32 = TrafficClass::ALL
        .iter()
        .map(|c| c.weight() * report.level_of(*c).value())
        .sum();
    max - load
}

/// Whether an operation flipped a queue between empty and non-empty; such
/// transitions trigger immediate congestion propagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    None,
    BecameNonEmpty,
    BecameEmpty,
}

/// One FIFO per traffic class, each with the same packet-count capacity,
/// drop-tail on overflow.
#[derive(Debug, Clone)]
pub struct ClassQueues<T> {
    queues: [VecDeque<T>; 4],
    capacity: usize,
}

impl<T> ClassQueues<T> {
    pub fn new(capacity: usize) -> ClassQueues<T> {
        ClassQueues {
            queues: [const { VecDeque::new() }; 4],
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self, class: TrafficClass) -> usize {
        self.queues[class.index()].len()
    }

    pub fn is_empty(&self) -> bool {
        self.queues.iter().all(|q| q.is_empty())
    }

    /// Current length over capacity, in [0, 1].
    pub fn occupancy(&self, class: TrafficClass) -> f64 {
        if self.capacity == 0 {
            return 1.0;
        }
        self.len(class) as f64 / self.capacity as f64
    }

    /// Drop-tail admission into the class FIFO. A full queue refuses the
    /// item and hands it back.
    pub fn enqueue(&mut self, class: TrafficClass, item: T) -> Result<Transition, T> {
        let q = &mut self.queues[class.index()];
        if q.len() >= self.capacity {
            return Err(item);
        }
        let transition = if q.is_empty() {
            Transition::BecameNonEmpty
        } else {
            Transition::None
        };
        q.push_back(item);
        Ok(transition)
    }

    /// Remove and return the first queued item (highest class first, FIFO
    /// within a class) for which `eligible` holds.
    pub fn take_first<F>(&mut self, mut eligible: F) -> Option<(TrafficClass, T, Transition)>
    where
        F: FnMut(TrafficClass, &T) -> bool,
    {
        for class in TrafficClass::ALL.iter().rev() {
            let q = &mut self.queues[class.index()];
            if let Some(pos) = q.iter().position(|item| eligible(*class, item)) {
                let item = q.remove(pos).expect("position is in range");
                let transition = if q.is_empty() {
                    Transition::BecameEmpty
                } else {
                    Transition::None
                };
                return Some((*class, item, transition));
            }
        }
        None
    }

    /// Drain every queued item, highest class first, FIFO within class.
    pub fn drain_all(&mut self) -> Vec<(TrafficClass, T)> {
        let mut out = Vec::new();
        for class in TrafficClass::ALL.iter().rev() {
            for item in self.queues[class.index()].drain(..) {
                out.push((*class, item));
            }
        }
        out
    }

    /// Remove every queued item failing `keep`, preserving order of the
    /// rest. Returns the removed items and whether any queue became empty.
    pub fn retain<F>(&mut self, mut keep: F) -> (Vec<(TrafficClass, T)>, bool)
    where
        F: FnMut(TrafficClass, &T) -> bool,
    {
        let mut removed = Vec::new();
        let mut emptied = false;
        for class in TrafficClass::ALL {
            let q = &mut self.queues[class.index()];
            let was_non_empty = !q.is_empty();
            let mut kept = VecDeque::with_capacity(q.len());
            for item in q.drain(..) {
                if keep(class, &item) {
                    kept.push_back(item);
                } else {
                    removed.push((class, item));
                }
            }
            *q = kept;
            if was_non_empty && q.is_empty() {
                emptied = true;
            }
        }
        (removed, emptied)
    }

    /// Visit every queued item.
    pub fn iter(&self) -> impl Iterator<Item = (TrafficClass, &T)> {
        TrafficClass::ALL.iter().flat_map(move |class| {
            self.queues[class.index()].iter().map(move |item| (*class, item))
        })
    }

    /// Per-class snapshot for congestion reporting.
    pub fn report(&self, thresholds: LevelThresholds, now: SimTime) -> CongestionReport {
        let mut occupancy = [0.0; 4];
        let mut level = [CongestionLevel::Low; 4];
        for class in TrafficClass::ALL {
            let occ = self.occupancy(class);
            occupancy[class.index()] = occ;
            level[class.index()] =
                congestion_level(occ, thresholds).expect("occupancy is a valid ratio");
        }
        CongestionReport {
            occupancy,
            level,
            measured_at: now,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn occupancy_ratio() {
        let mut q: ClassQueues<u32> = ClassQueues::new(50);
        assert_eq!(q.occupancy(TrafficClass::BestEffort), 0.0);
        for i in 0..30 {
            q.enqueue(TrafficClass::BestEffort, i).unwrap();
        }
        assert_eq!(q.occupancy(TrafficClass::BestEffort), 0.6);
        for i in 0..20 {
            q.enqueue(TrafficClass::BestEffort, i).unwrap();
        }
        assert_eq!(q.occupancy(TrafficClass::BestEffort), 1.0);
    }

    #[test]
    fn levels_at_spec_thresholds() {
        let t = LevelThresholds::default();
        assert_eq!(congestion_level(0.0, t).unwrap(), CongestionLevel::Low);
        assert_eq!(congestion_level(0.5, t).unwrap(), CongestionLevel::Medium);
        assert_eq!(congestion_level(0.95, t).unwrap(), CongestionLevel::High);
        assert_eq!(congestion_level(0.8, t).unwrap(), CongestionLevel::High);
        assert!(congestion_level(1.2, t).is_err());
        assert!(congestion_level(-0.1, t).is_err());
    }

    #[test]
    fn level_is_monotone_in_occupancy() {
        let t = LevelThresholds::default();
        let mut prev = CongestionLevel::Low;
        for i in 0..=100 {
            let level = congestion_level(i as f64 / 100.0, t).unwrap();
            assert!(level >= prev);
            prev = level;
        }
    }

    #[test]
    fn priority_prefers_delay_insensitive_congestion() {
        let mut idle = CongestionReport::idle(SimTime::ZERO);
        let max = node_priority(&idle);
        assert_eq!(max, 30);

        // Background High vs Voice High: the background-congested node keeps
        // more priority
        let mut bg_high = idle.clone();
        bg_high.level[TrafficClass::Background.index()] = CongestionLevel::High;
        let mut voice_high = idle.clone();
        voice_high.level[TrafficClass::Voice.index()] = CongestionLevel::High;
        assert!(node_priority(&bg_high) > node_priority(&voice_high));

        // identical reports score equally
        assert_eq!(node_priority(&bg_high), node_priority(&bg_high.clone()));

        // any single level rise strictly decreases the score
        for class in TrafficClass::ALL {
            let before = node_priority(&idle);
            idle.level[class.index()] = CongestionLevel::Medium;
            assert!(node_priority(&idle) < before);
            idle.level[class.index()] = CongestionLevel::Low;
        }
    }

    #[test]
    fn priority_invariant_under_equal_level_swap() {
        // swapping the levels of two equally-leveled delay-insensitive
        // classes leaves the score unchanged
        let mut a = CongestionReport::idle(SimTime::ZERO);
        a.level[TrafficClass::Background.index()] = CongestionLevel::Medium;
        a.level[TrafficClass::BestEffort.index()] = CongestionLevel::Medium;
        let mut b = a.clone();
        b.level.swap(
            TrafficClass::Background.index(),
            TrafficClass::BestEffort.index(),
        );
        assert_eq!(node_priority(&a), node_priority(&b));
    }

    #[test]
    fn drop_tail_at_capacity() {
        let mut q: ClassQueues<u32> = ClassQueues::new(50);
        let mut accepted = 0;
        let mut dropped = 0;
        for i in 0..60 {
            match q.enqueue(TrafficClass::Video, i) {
                Ok(_) => accepted += 1,
                Err(rejected) => {
                    assert_eq!(rejected, i);
                    dropped += 1;
                }
            }
        }
        assert_eq!((accepted, dropped), (50, 10));
    }

    #[test]
    fn retain_preserves_order_and_reports_emptied() {
        let mut q: ClassQueues<u32> = ClassQueues::new(10);
        for i in 0..6 {
            q.enqueue(TrafficClass::BestEffort, i).unwrap();
        }
        q.enqueue(TrafficClass::Voice, 99).unwrap();
        let (removed, emptied) = q.retain(|_, &v| v % 2 == 0 && v != 99);
        assert_eq!(
            removed.iter().map(|&(_, v)| v).collect::<Vec<_>>(),
            vec![1, 3, 5, 99]
        );
        assert!(emptied); // the voice queue emptied
        let left: Vec<u32> = q.iter().map(|(_, &v)| v).collect();
        assert_eq!(left, vec![0, 2, 4]);
    }

    #[test]
    fn take_first_respects_priority_then_fifo() {
        let mut q: ClassQueues<u32> = ClassQueues::new(10);
        q.enqueue(TrafficClass::Background, 1).unwrap();
        q.enqueue(TrafficClass::Voice, 2).unwrap();
        q.enqueue(TrafficClass::Voice, 3).unwrap();
        let (class, item, _) = q.take_first(|_, _| true).unwrap();
        assert_eq!((class, item), (TrafficClass::Voice, 2));
        let (class, item, _) = q.take_first(|_, _| true).unwrap();
        assert_eq!((class, item), (TrafficClass::Voice, 3));
        let (class, item, transition) = q.take_first(|_, _| true).unwrap();
        assert_eq!((class, item), (TrafficClass::Background, 1));
        assert_eq!(transition, Transition::BecameEmpty);
        assert!(q.take_first(|_, _| true).is_none());
    }
}
