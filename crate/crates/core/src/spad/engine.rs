use alloc::vec::Vec;

use super::config::{DetectorTruth, GateConfig, PhotonSource};
use super::countoff::CountOff;
use super::event::{Cause, EventRecord};
use super::prob::{dark_prob_per_gate, per_gate_photon_prob, profile_factor};
use super::summary::CountSummary;
use super::traps::TrapState;
use crate::error::{ensure, Result};
use crate::rng::SimRng;

/// One sequential simulation instance.
///
/// Rather than drawing three trials per gate, the engine jumps between
/// candidate gates: photon and dark candidates are drawn as geometric gaps
/// (equivalent to independent per-gate Bernoulli trials), trap releases come
/// from the [`TrapState`] queue. Cost scales with the number of avalanches,
/// not the number of gates.
#[derive(Debug, Clone)]
pub struct Engine {
    gate: GateConfig,
    source: Option<PhotonSource>,
    detector: DetectorTruth,
    rng: SimRng,
    p_photon: f64,
    p_dark: f64,
}

impl Engine {
    pub fn new(gate: GateConfig, source: Option<PhotonSource>, detector: DetectorTruth, seed: u64) -> Result<Self> {
        gate.validate()?;
        if let Some(s) = &source {
            s.validate(&gate)?;
        }
        detector.validate()?;
        let p_photon = source.map_or(0.0, |s| per_gate_photon_prob(s.mu * profile_factor(&gate, &s), detector.eta));
        let p_dark = dark_prob_per_gate(detector.p_dc_ns, gate.delta_t);
        Ok(Self { gate, source, detector, rng: SimRng::new(seed), p_photon, p_dark })
    }

    /// Detection probability of an illuminated gate from photons alone.
    pub fn photon_prob(&self) -> f64 {
        self.p_photon
    }

    pub fn dark_prob(&self) -> f64 {
        self.p_dark
    }

    /// Runs gates `0..n_gates`, handing every avalanche to `sink` in time order.
    pub fn run<F: FnMut(&EventRecord)>(mut self, n_gates: u64, mut sink: F) -> CountSummary {
        let period = self.gate.period();
        let half_window = 0.5 * self.gate.delta_t;
        let divider = self.source.map(|s| s.divider as u64);
        let delay = self.source.map_or(0.0, |s| s.delay);
        let ap = self.detector.afterpulse;
        let traps_on = ap.is_enabled();

        let mut summary = CountSummary::empty(self.gate.f_g, self.source.map(|s| s.divider));
        summary.n_gates = n_gates;
        summary.illuminated_gates = divider.map_or(0, |k| n_gates.div_ceil(k));

        let mut count_off = CountOff::new(self.gate.count_off);
        let mut traps = TrapState::new();
        let mut next_photon = match divider {
            Some(k) => self.next_photon_after(None, k),
            None => u64::MAX,
        };
        let mut next_dark = self.next_dark_after(None);

        loop {
            let trap_gate = traps.next_gate().unwrap_or(u64::MAX);
            let g = next_photon.min(next_dark).min(trap_gate);
            if g >= n_gates {
                break;
            }
            let gate_time = self.gate.gate_time(g);

            let mut avalanche = None;
            if trap_gate == g {
                avalanche = traps.take_gate(g).map(|t| (t, Cause::Afterpulse));
            }
            if next_photon == g {
                if avalanche.is_none() {
                    avalanche = Some((gate_time + delay, Cause::Photon));
                }
                next_photon = self.next_photon_after(Some(g), divider.unwrap_or(1));
            }
            if next_dark == g {
                if avalanche.is_none() {
                    let t = gate_time - half_window + self.rng.uniform() * self.gate.delta_t;
                    avalanche = Some((t, Cause::Dark));
                }
                next_dark = self.next_dark_after(Some(g));
            }
            let Some((time, cause)) = avalanche else {
                continue;
            };

            let event = EventRecord {
                gate_index: g,
                time,
                cause,
                counted: count_off.offer(time),
                illuminated: divider.is_some_and(|k| g % k == 0),
            };
            summary.record(&event);
            sink(&event);

            if traps_on {
                let n = self.rng.poisson(ap.mean_traps_per_avalanche);
                for _ in 0..n {
                    let release = time + self.rng.exponential(ap.detrap_lifetime);
                    let target = libm::round(release * self.gate.f_g);
                    if target <= g as f64 || target >= n_gates as f64 {
                        continue;
                    }
                    let target = target as u64;
                    let offset = release - target as f64 * period;
                    if offset.abs() > half_window {
                        continue;
                    }
                    if self.rng.bernoulli(ap.trigger_prob) {
                        traps.push(target, release);
                    }
                }
            }
        }
        summary
    }

    fn next_photon_after(&mut self, current: Option<u64>, divider: u64) -> u64 {
        let first = match current {
            Some(g) => g.saturating_add(divider),
            None => 0,
        };
        match self.rng.geometric(self.p_photon) {
            Some(skip) => first.saturating_add(skip.saturating_mul(divider)),
            None => u64::MAX,
        }
    }

    fn next_dark_after(&mut self, current: Option<u64>) -> u64 {
        let first = current.map_or(0, |g| g.saturating_add(1));
        match self.rng.geometric(self.p_dark) {
            Some(skip) => first.saturating_add(skip),
            None => u64::MAX,
        }
    }
}

/// Simulates `n_gates` gates and returns the full event stream and summary.
pub fn simulate_gates(
    gate: &GateConfig,
    source: Option<&PhotonSource>,
    detector: &DetectorTruth,
    n_gates: u64,
    seed: u64,
) -> Result<(Vec<EventRecord>, CountSummary)> {
    ensure(n_gates >= 1, "n_gates >= 1")?;
    let engine = Engine::new(*gate, source.copied(), *detector, seed)?;
    let mut events = Vec::new();
    let summary = engine.run(n_gates, |e| events.push(*e));
    Ok((events, summary))
}

/// Like [`simulate_gates`] without retaining events.
pub fn simulate_summary(
    gate: &GateConfig,
    source: Option<&PhotonSource>,
    detector: &DetectorTruth,
    n_gates: u64,
    seed: u64,
) -> Result<CountSummary> {
    ensure(n_gates >= 1, "n_gates >= 1")?;
    let engine = Engine::new(*gate, source.copied(), *detector, seed)?;
    Ok(engine.run(n_gates, |_| {}))
}
