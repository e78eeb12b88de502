use super::event::EventRecord;
use crate::error::{Error, Result};
use alloc::vec::Vec;

/// Greedy count-off rule: an avalanche is counted iff at least `count_off`
/// has elapsed since the last counted avalanche.
#[derive(Debug, Clone, Copy)]
pub struct CountOff {
    count_off: f64,
    last_counted: Option<f64>,
}

impl CountOff {
    pub fn new(count_off: f64) -> Self {
        Self { count_off, last_counted: None }
    }

    /// Offers an avalanche at `time`; returns whether it is counted.
    #[inline]
    pub fn offer(&mut self, time: f64) -> bool {
        let counted = match self.last_counted {
            Some(last) => time - last >= self.count_off,
            None => true,
        };
        if counted {
            self.last_counted = Some(time);
        }
        counted
    }
}

/// Recomputes the `counted` flags of a time-ordered event stream.
pub fn apply_count_off(events: &[EventRecord], count_off: f64) -> Result<Vec<EventRecord>> {
    if let Some(index) = events.windows(2).position(|w| w[1].time < w[0].time).map(|i| i + 1) {
        return Err(Error::Unordered { index });
    }
    let mut rule = CountOff::new(count_off);
    Ok(events.iter().map(|e| EventRecord { counted: rule.offer(e.time), ..*e }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spad::Cause;
    use crate::units::NS;
    use alloc::vec;

    fn ev(gate_index: u64, time: f64) -> EventRecord {
        EventRecord { gate_index, time, cause: Cause::Dark, counted: false, illuminated: false }
    }

    fn counted(events: &[EventRecord]) -> Vec<f64> {
        events.iter().filter(|e| e.counted).map(|e| e.time).collect()
    }

    #[test]
    fn direct_rule() {
        let events = vec![ev(0, 0.0), ev(5, 5.0 * NS), ev(11, 12.0 * NS)];
        let out = apply_count_off(&events, 10.0 * NS).unwrap();
        assert_eq!(counted(&out), vec![0.0, 12.0 * NS]);
    }

    #[test]
    fn zero_count_off_counts_all() {
        let events = vec![ev(0, 0.0), ev(1, 1.0 * NS), ev(1, 1.0 * NS), ev(2, 2.0 * NS)];
        let out = apply_count_off(&events, 0.0).unwrap();
        assert!(out.iter().all(|e| e.counted));
    }

    #[test]
    fn unordered_rejected() {
        let events = vec![ev(0, 0.0), ev(2, 2.0 * NS), ev(1, 1.0 * NS)];
        assert_eq!(apply_count_off(&events, 1.0 * NS), Err(Error::Unordered { index: 2 }));
    }

    #[test]
    fn saturating_stream_rate() {
        // An avalanche in every gate at 921 MHz: the first gate at least
        // 10 ns after a count is the 10th one, so the counted rate is f_g / 10.
        let f_g = 921e6;
        let n = 92_100u64;
        let events: Vec<_> = (0..n).map(|i| ev(i, i as f64 / f_g)).collect();
        let out = apply_count_off(&events, 10.0 * NS).unwrap();
        let c = out.iter().filter(|e| e.counted).count() as f64;
        let rate = c / (n as f64 / f_g);
        assert!((rate - 92.1e6).abs() / 92.1e6 < 1e-3, "{rate}");
        assert!(rate < 100e6);
        // consecutive counted gates are exactly 10 apart
        let idx: Vec<u64> = out.iter().filter(|e| e.counted).map(|e| e.gate_index).collect();
        assert!(idx.windows(2).all(|w| w[1] - w[0] == 10));
    }
}
