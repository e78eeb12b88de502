//! Afterpulse yield of the engine against exhaustive enumeration.
//!
//! Every illuminated gate fires, nothing else does except trap releases, and
//! traps empty within a few gates. The expected number of afterpulses per
//! photon avalanche then follows from summing over all 2^20 firing patterns
//! of the next 20 gates.

use rapidgate_core::estimators::afterpulse_prob;
use rapidgate_core::spad::{AfterpulseModel, DetectorTruth, Engine, GateConfig, PhotonSource, Profile};
use rapidgate_core::units::{NS, PS};

const HORIZON: usize = 20;
const DIVIDER: u32 = 40;

struct Setup {
    gate: GateConfig,
    model: AfterpulseModel,
}

impl Setup {
    fn new(mean_traps: f64, trigger_prob: f64) -> Self {
        Self {
            gate: GateConfig { f_g: 921e6, delta_t: 20.0 * PS, profile: Profile::Gaussian, count_off: 0.0 },
            model: AfterpulseModel { mean_traps_per_avalanche: mean_traps, detrap_lifetime: 2.0 * NS, trigger_prob },
        }
    }

    /// Mean number of firing releases landing in the gate `d` periods after
    /// an avalanche at a gate peak.
    fn lambda(&self, d: usize) -> f64 {
        let t = self.gate.period();
        let tau = self.model.detrap_lifetime;
        let h = 0.5 * self.gate.delta_t;
        let q = (-(d as f64 * t - h) / tau).exp() - (-(d as f64 * t + h) / tau).exp();
        self.model.mean_traps_per_avalanche * self.model.trigger_prob * q
    }

    /// Expected afterpulses in gates 1..=HORIZON after a gate-0 avalanche.
    fn oracle_yield(&self) -> f64 {
        let lambdas: Vec<f64> = (0..=HORIZON).map(|d| self.lambda(d)).collect();
        fn walk(j: usize, fired: &mut Vec<usize>, prob: f64, lambdas: &[f64]) -> f64 {
            if j > HORIZON || prob < 1e-20 {
                return 0.0;
            }
            let rate: f64 = fired.iter().map(|&i| lambdas[j - i]).sum();
            let p_fire = 1.0 - (-rate).exp();
            fired.push(j);
            let yes = walk(j + 1, fired, prob * p_fire, lambdas);
            fired.pop();
            let no = walk(j + 1, fired, prob * (1.0 - p_fire), lambdas);
            prob * p_fire + yes + no
        }
        walk(1, &mut vec![0], 1.0, &lambdas)
    }

    /// Engine estimate of the afterpulse probability with its standard error
    /// from the spread of per-cycle yields.
    fn simulate(&self, cycles: u64, seed: u64) -> (f64, f64, f64) {
        let source = PhotonSource { mu: 1e6, divider: DIVIDER, delay: 0.0, ..Default::default() };
        let detector = DetectorTruth { eta: 0.5, p_dc_ns: 0.0, afterpulse: self.model };
        let engine = Engine::new(self.gate, Some(source), detector, seed).unwrap();
        assert_eq!(engine.photon_prob(), 1.0);
        let k = DIVIDER as u64;
        let (mut cycle, mut current, mut sum, mut sum_sq) = (0u64, 0f64, 0f64, 0f64);
        let summary = engine.run(cycles * k, |e| {
            let c = e.gate_index / k;
            while cycle < c {
                sum += current;
                sum_sq += current * current;
                current = 0.0;
                cycle += 1;
            }
            if e.gate_index % k != 0 {
                current += 1.0;
            }
        });
        sum += current;
        sum_sq += current * current;
        let n = cycles as f64;
        let mean = sum / n;
        let se = ((sum_sq / n - mean * mean) / n).sqrt();
        let eq2 = afterpulse_prob(summary.rate(), summary.coincidence_rate(), 0.0, DIVIDER).unwrap();
        (eq2, mean, se)
    }
}

fn check(mean_traps: f64, trigger_prob: f64, seed: u64) {
    let setup = Setup::new(mean_traps, trigger_prob);
    let expected = setup.oracle_yield();
    let (eq2, mean, se) = setup.simulate(1_000_000, seed);
    println!("m={mean_traps} c={trigger_prob}: oracle {expected:.5} engine {eq2:.5} +- {se:.5}");
    assert!((eq2 - mean).abs() < 1e-12, "estimator must equal the per-cycle mean");
    assert!((eq2 - expected).abs() < 4.0 * se, "oracle {expected} engine {eq2} se {se}");
}

#[test]
fn yield_matches_enumeration_strong_traps() {
    check(20.0, 0.5, 1);
}

#[test]
fn yield_matches_enumeration_weak_traps() {
    check(4.0, 1.0, 2);
}

#[test]
fn compounding_exceeds_first_generation() {
    let s = Setup::new(20.0, 0.5);
    let first: f64 = (1..=HORIZON).map(|d| 1.0 - (-s.lambda(d)).exp()).sum();
    assert!(s.oracle_yield() > first);
}
