use alloc::collections::BinaryHeap;
use core::cmp::{Ordering, Reverse};

#[derive(Debug, Clone, Copy)]
struct Release {
    gate: u64,
    time: f64,
}

impl PartialEq for Release {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Release {}
impl PartialOrd for Release {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Release {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gate.cmp(&other.gate).then(self.time.total_cmp(&other.time))
    }
}

/// Pending carrier releases that will fire an avalanche, ordered by time.
///
/// Only releases that land inside an open window and pass the trigger trial
/// are stored; all others are discarded when the carrier is trapped.
#[derive(Debug, Clone, Default)]
pub struct TrapState {
    pending: BinaryHeap<Reverse<Release>>,
}

impl TrapState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn push(&mut self, gate: u64, time: f64) {
        self.pending.push(Reverse(Release { gate, time }));
    }

    /// Gate of the earliest pending release.
    pub fn next_gate(&self) -> Option<u64> {
        self.pending.peek().map(|r| r.0.gate)
    }

    /// Removes every release in `gate` and returns the earliest release time.
    pub fn take_gate(&mut self, gate: u64) -> Option<f64> {
        let mut first = None;
        while let Some(Reverse(r)) = self.pending.peek() {
            if r.gate != gate {
                break;
            }
            let t = r.time;
            self.pending.pop();
            first.get_or_insert(t);
        }
        first
    }

    /// Drops releases scheduled before `gate`.
    pub fn discard_before(&mut self, gate: u64) {
        while matches!(self.pending.peek(), Some(Reverse(r)) if r.gate < gate) {
            self.pending.pop();
        }
    }
}
