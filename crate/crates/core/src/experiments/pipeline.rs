use alloc::vec::Vec;

use super::{Lane, Scenario, SimJob};
use crate::error::Result;
use crate::spad::simulate_gates;
use crate::waveform::{detect_events, ChainConfig};

/// Gate sets seen by the engine and by the waveform discriminator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineComparison {
    pub n_gates: u64,
    /// Gates holding an avalanche, counted or not.
    pub engine_gates: Vec<u64>,
    /// Gates flagged by the discriminator.
    pub detected_gates: Vec<u64>,
    /// Avalanche gates directly following another avalanche gate. Their
    /// pulse overlaps the inverted copy of the previous one after
    /// self-differencing.
    pub adjacent: Vec<u64>,
}

impl PipelineComparison {
    pub fn sets_equal(&self) -> bool {
        self.engine_gates == self.detected_gates
    }

    pub fn missing(&self) -> Vec<u64> {
        self.engine_gates.iter().filter(|g| self.detected_gates.binary_search(g).is_err()).copied().collect()
    }

    pub fn spurious(&self) -> Vec<u64> {
        self.detected_gates.iter().filter(|g| self.engine_gates.binary_search(g).is_err()).copied().collect()
    }
}

/// Simulates `n_gates` with the engine, renders every avalanche through the
/// analog chain and discriminates each gate.
pub fn compare_pipeline(
    scenario: &Scenario,
    chain: &ChainConfig,
    n_gates: u64,
    master_seed: u64,
) -> Result<PipelineComparison> {
    let seed = SimJob::new(master_seed, 0, Lane::Illuminated, *scenario, n_gates).seed;
    let (events, _) = simulate_gates(&scenario.gate, scenario.source.as_ref(), &scenario.detector, n_gates, seed)?;
    let flags = detect_events(chain, &events, n_gates)?;
    let engine_gates: Vec<u64> = events.iter().map(|e| e.gate_index).collect();
    let detected_gates = flags.iter().enumerate().filter(|(_, f)| **f).map(|(i, _)| i as u64).collect();
    let adjacent = engine_gates.windows(2).filter(|w| w[1] == w[0] + 1).map(|w| w[1]).collect();
    Ok(PipelineComparison { n_gates, engine_gates, detected_gates, adjacent })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bright_run_matches() {
        let mut s = Scenario::operating_point();
        s.source.as_mut().unwrap().mu = 2.0;
        let chain = ChainConfig::for_gate(&s.gate);
        let c = compare_pipeline(&s, &chain, 20_000, 5).unwrap();
        assert!(c.engine_gates.len() > 200);
        assert!(c.adjacent.is_empty());
        assert!(c.sets_equal(), "missing {:?} spurious {:?}", c.missing(), c.spurious());
    }

    #[test]
    fn adjacent_avalanche_is_masked() {
        // Every gate illuminated and saturated: the first gate fires, every
        // following one is cancelled by the delayed copy.
        let mut s = Scenario::operating_point();
        s.gate.count_off = 0.0;
        s.source = Some(crate::spad::PhotonSource { mu: 1e6, divider: 1, ..Default::default() });
        let chain = ChainConfig::for_gate(&s.gate);
        let c = compare_pipeline(&s, &chain, 64, 1).unwrap();
        assert_eq!(c.engine_gates.len(), 64);
        assert_eq!(c.adjacent.len(), 63);
        assert!(!c.sets_equal());
        assert!(c.detected_gates.contains(&0));
    }
}
