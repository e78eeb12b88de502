//! Statistical properties of the gate-level engine.

use proptest::prelude::*;
use rapidgate_core::spad::{
    simulate_gates, simulate_summary, AfterpulseModel, Cause, DetectorTruth, GateConfig, PhotonSource,
};
use rapidgate_core::units::NS;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn op() -> (GateConfig, PhotonSource, DetectorTruth) {
    (GateConfig::operating_point(), PhotonSource::default(), DetectorTruth::operating_point())
}

#[test]
fn most_avalanches_come_from_photons() {
    let (gate, source, det) = op();
    let (events, summary) = simulate_gates(&gate, Some(&source), &det, 20_000_000, 3).unwrap();
    let counted: Vec<_> = events.iter().filter(|e| e.counted).collect();
    let in_light = counted.iter().filter(|e| e.illuminated).count();
    let share = in_light as f64 / counted.len() as f64;
    assert!(share >= 0.9, "{share}");
    assert_eq!(summary.counted, counted.len() as u64);
    let photons = counted.iter().filter(|e| e.cause == Cause::Photon).count();
    assert!(photons as f64 / counted.len() as f64 >= 0.9);
}

#[test]
fn dark_counts_uniform_over_gate_phase() {
    let (gate, _, mut det) = op();
    det.p_dc_ns = 1e-3;
    det.afterpulse = AfterpulseModel::disabled();
    let gate = GateConfig { count_off: 0.0, ..gate };
    let (events, _) = simulate_gates(&gate, None, &det, 10_000_000, 8).unwrap();
    let mut bins = [0f64; 12];
    for e in &events {
        bins[(e.gate_index % 12) as usize] += 1.0;
    }
    let expected = events.len() as f64 / 12.0;
    let chi2: f64 = bins.iter().map(|b| (b - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new(11.0).unwrap().cdf(chi2);
    assert!(p > 1e-3, "chi2 {chi2} p {p}");
}

#[test]
fn dark_times_uniform_within_window() {
    let (gate, _, mut det) = op();
    det.p_dc_ns = 1e-3;
    det.afterpulse = AfterpulseModel::disabled();
    let (events, _) = simulate_gates(&gate, None, &det, 10_000_000, 9).unwrap();
    let mut bins = [0f64; 10];
    for e in &events {
        let offset = e.time - gate.gate_time(e.gate_index) + 0.5 * gate.delta_t;
        let b = ((offset / gate.delta_t) * 10.0).floor().clamp(0.0, 9.0) as usize;
        bins[b] += 1.0;
    }
    let expected = events.len() as f64 / 10.0;
    let chi2: f64 = bins.iter().map(|b| (b - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new(9.0).unwrap().cdf(chi2);
    assert!(p > 1e-3, "chi2 {chi2} p {p}");
}

#[test]
fn coincidence_fraction_converges() {
    let (gate, source, mut det) = op();
    let gate = GateConfig { count_off: 0.0, ..gate };
    det.p_dc_ns = 1e-4;
    det.afterpulse = AfterpulseModel::disabled();
    let n = 60_000_000;
    let s = simulate_summary(&gate, Some(&source), &det, n, 4).unwrap();
    let p_dark = det.p_dc_ns * gate.delta_t / NS;
    let expected = 1.0 - (1.0 - p_dark) * (-source.mu * det.eta).exp();
    let frac = s.counted_coincident as f64 / s.illuminated_gates as f64;
    let sigma = (expected * (1.0 - expected) / s.illuminated_gates as f64).sqrt();
    assert!((frac - expected).abs() < 3.0 * sigma, "{frac} vs {expected}");
}

#[test]
fn rate_errors_scale_with_counts() {
    // Spread of independent replicas shrinks as 1/sqrt(n) and matches the
    // Poisson error reported by the summary.
    let (gate, source, det) = op();
    let spread = |n: u64| {
        let rates: Vec<f64> =
            (0..40).map(|seed| simulate_summary(&gate, Some(&source), &det, n, 100 + seed).unwrap().rate()).collect();
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (rates.len() - 1) as f64;
        let reported = simulate_summary(&gate, Some(&source), &det, n, 99).unwrap().rate_err();
        (var.sqrt(), reported)
    };
    let (small, small_reported) = spread(1_000_000);
    let (large, large_reported) = spread(4_000_000);
    let ratio = small / large;
    assert!((1.4..2.8).contains(&ratio), "{ratio}");
    assert!((small / small_reported - 1.0).abs() < 0.4);
    assert!((large / large_reported - 1.0).abs() < 0.4);
}

#[test]
fn merge_is_associative_and_order_free() {
    let (gate, source, det) = op();
    let runs: Vec<_> = (0..3).map(|s| simulate_summary(&gate, Some(&source), &det, 1_000_000, s).unwrap()).collect();
    let ab_c = runs[0].merge(&runs[1]).unwrap().merge(&runs[2]).unwrap();
    let a_bc = runs[0].merge(&runs[1].merge(&runs[2]).unwrap()).unwrap();
    let cba = runs[2].merge(&runs[1]).unwrap().merge(&runs[0]).unwrap();
    assert_eq!(ab_c, a_bc);
    assert_eq!(ab_c, cba);
    let dark = simulate_summary(&gate, None, &det, 1000, 0).unwrap();
    assert!(runs[0].merge(&dark).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stream_invariants(
        seed in any::<u64>(),
        mu in 0.05f64..50.0,
        divider in 1u32..16,
        count_off_ns in 0.0f64..20.0,
        traps in 0.0f64..3.0,
        p_dc_ns in 0.0f64..1e-2,
    ) {
        let gate = GateConfig { count_off: count_off_ns * NS, ..GateConfig::operating_point() };
        let source = PhotonSource { mu, divider, ..Default::default() };
        let det = DetectorTruth {
            eta: 0.093,
            p_dc_ns,
            afterpulse: AfterpulseModel { mean_traps_per_avalanche: traps, ..AfterpulseModel::calibrated() },
        };
        let n = 200_000;
        let (events, s) = simulate_gates(&gate, Some(&source), &det, n, seed).unwrap();
        let (again, s2) = simulate_gates(&gate, Some(&source), &det, n, seed).unwrap();
        prop_assert_eq!(&events, &again);
        prop_assert_eq!(s, s2);

        for w in events.windows(2) {
            prop_assert!(w[1].gate_index > w[0].gate_index);
        }
        let mut last: Option<f64> = None;
        for e in events.iter().filter(|e| e.counted) {
            if let Some(t) = last {
                prop_assert!(e.time - t >= gate.count_off - 1e-18);
            }
            last = Some(e.time);
        }
        let f_p = source.f_p(&gate);
        prop_assert!(s.counted_coincident as f64 <= f_p * s.duration() + 1.0);
        if gate.count_off > 0.0 {
            prop_assert!(s.counted as f64 <= s.duration() / gate.count_off + 1.0);
        }
        prop_assert!(s.counted_coincident <= s.counted);
        prop_assert!(s.counted <= n);
    }
}
