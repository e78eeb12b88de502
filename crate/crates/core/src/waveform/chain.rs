use alloc::vec::Vec;
use core::ops::Range;

use super::config::{ChainConfig, SdConfig, WaveformConfig};
use super::notch::apply_notch_bank;
use crate::error::{ensure, Result};
use crate::rng::SimRng;
use crate::spad::EventRecord;

/// Sinusoidal gate drive, zero mean, peak-to-peak `v_pp`. Sample 0 sits on a
/// gate peak, so gate `n` peaks at `n / f_g`.
pub fn synth_gate_waveform(config: &WaveformConfig, f_g: f64, n_periods: u32) -> Result<Vec<f64>> {
    config.validate(f_g)?;
    ensure(n_periods >= 1, "n_periods >= 1")?;
    let len = libm::round(n_periods as f64 * config.sample_rate / f_g) as usize;
    let cycles_per_sample = f_g / config.sample_rate;
    let half = 0.5 * config.v_pp;
    // Phase reduced to one cycle so that integer samples-per-period buffers
    // repeat bit for bit.
    Ok((0..len)
        .map(|i| {
            let phase = i as f64 * cycles_per_sample;
            half * libm::cos(core::f64::consts::TAU * (phase - libm::floor(phase)))
        })
        .collect())
}

/// Device output: feedthrough of the gate through the even-order
/// nonlinearity plus one step per avalanche.
///
/// Each avalanche rises linearly over `avalanche_rise`, holds
/// `avalanche_amp`, and is cut off when its gate closes (a quarter period
/// after the peak, where the drive crosses its mean). `avalanche_times` are
/// relative to sample 0.
pub fn device_response(gate: &[f64], avalanche_times: &[f64], config: &WaveformConfig, f_g: f64) -> Vec<f64> {
    let half = 0.5 * config.v_pp;
    let scale = config.feedthrough_gain * half;
    let mut out: Vec<f64> = gate
        .iter()
        .map(|&v| {
            let x = v / half;
            let x2 = x * x;
            scale * (x + config.a2 * x2 + config.a4 * x2 * x2)
        })
        .collect();
    let dt = config.dt();
    let period = 1.0 / f_g;
    for &t in avalanche_times {
        let close = (libm::round(t * f_g) + 0.25) * period;
        if t >= close {
            continue;
        }
        let first = libm::ceil(t / dt).max(0.0) as usize;
        let last = (libm::ceil(close / dt) as usize).min(out.len());
        for (i, v) in out.iter_mut().enumerate().take(last).skip(first) {
            let since = i as f64 * dt - t;
            let frac = if config.avalanche_rise > 0.0 { (since / config.avalanche_rise).min(1.0) } else { 1.0 };
            *v += config.avalanche_amp * frac;
        }
    }
    out
}

/// `y[t] = x[t] - g x[t - delay - skew]` with `g = 1 + amplitude_mismatch`.
/// Fractional delays use linear interpolation; samples before the start are zero.
pub fn self_difference(samples: &[f64], sd: &SdConfig, sample_rate: f64) -> Vec<f64> {
    let d = (sd.delay + sd.skew) * sample_rate;
    let whole = libm::floor(d);
    let frac = d - whole;
    let whole = whole as usize;
    let g = 1.0 + sd.amplitude_mismatch;
    let at = |i: usize, back: usize| if i >= back { samples[i - back] } else { 0.0 };
    (0..samples.len())
        .map(|i| {
            let delayed =
                if frac == 0.0 { at(i, whole) } else { (1.0 - frac) * at(i, whole) + frac * at(i, whole + 1) };
            samples[i] - g * delayed
        })
        .collect()
}

pub fn amplify(samples: &mut [f64], gain_db: f64) {
    let g = libm::pow(10.0, gain_db / 20.0);
    for v in samples {
        *v *= g;
    }
}

/// One flag per window: set iff the window's maximum reaches `threshold`.
pub fn discriminate(samples: &[f64], threshold: f64, windows: &[Range<usize>]) -> Vec<bool> {
    windows
        .iter()
        .map(|w| {
            let w = w.start.min(samples.len())..w.end.min(samples.len());
            samples[w].iter().any(|&v| v >= threshold)
        })
        .collect()
}

/// Discriminator windows of gates `0..n_gates` in a buffer whose gate 0 peaks
/// at sample `first_peak`.
pub fn gate_windows(chain: &ChainConfig, first_peak: usize, n_gates: u64) -> Vec<Range<usize>> {
    let spp = chain.samples_per_period();
    (0..n_gates)
        .map(|n| {
            let peak = first_peak as f64 + n as f64 * spp;
            let start = libm::round(peak + chain.window.0 * spp).max(0.0) as usize;
            let end = libm::round(peak + chain.window.1 * spp) as usize;
            start..end
        })
        .collect()
}

/// Buffers produced by one pass through the chain.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    /// Device output before the notch bank.
    pub device: Vec<f64>,
    /// After the notch bank.
    pub filtered: Vec<f64>,
    /// Discriminator input (after self-differencing and amplification).
    pub output: Vec<f64>,
}

/// Runs `n_periods` of the full chain with avalanches at `avalanche_times`
/// (relative to sample 0).
pub fn run_chain(chain: &ChainConfig, n_periods: u32, avalanche_times: &[f64]) -> Result<ChainOutput> {
    chain.validate()?;
    let wf = &chain.waveform;
    let gate = synth_gate_waveform(wf, chain.f_g, n_periods)?;
    let device = device_response(&gate, avalanche_times, wf, chain.f_g);
    drop(gate);
    let filtered = apply_notch_bank(&device, &chain.notches, wf.sample_rate)?;
    let mut output = self_difference(&filtered, &chain.sd, wf.sample_rate);
    amplify(&mut output, wf.amp2_gain_db);
    if wf.noise_rms > 0.0 {
        let mut rng = SimRng::new(chain.noise_seed);
        for v in output.iter_mut() {
            *v += wf.noise_rms * standard_normal(&mut rng);
        }
    }
    Ok(ChainOutput { device, filtered, output })
}

fn standard_normal(rng: &mut SimRng) -> f64 {
    let r = libm::sqrt(-2.0 * libm::log(rng.uniform_open()));
    r * libm::cos(core::f64::consts::TAU * rng.uniform())
}

/// Background and avalanche levels at the discriminator input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rejection {
    /// Largest steady-state background excursion, volts.
    pub background_residual: f64,
    /// Peak of a single avalanche response, volts.
    pub avalanche_peak: f64,
    /// `20 log10(avalanche_peak / background_residual)`.
    pub ratio_db: f64,
    /// Background amplitude after the notch bank (half peak-to-peak), volts.
    pub filtered_background: f64,
    /// Background amplitude before the notch bank (half peak-to-peak), volts.
    pub device_background: f64,
}

/// Runs a background-only pass and a pass with one avalanche at a gate peak
/// and reports steady-state levels at the discriminator input.
pub fn measure_rejection(chain: &ChainConfig) -> Result<Rejection> {
    let settle = chain.warmup_periods;
    let n_periods = settle + 64;
    let period = 1.0 / chain.f_g;
    let spp = chain.samples_per_period();
    let start = libm::round(settle as f64 * spp) as usize;

    let quiet = ChainConfig { waveform: WaveformConfig { noise_rms: 0.0, ..chain.waveform }, ..chain.clone() };
    let background = run_chain(chain, n_periods, &[])?;
    let background_quiet = run_chain(&quiet, n_periods, &[])?;
    let with_avalanche = run_chain(&quiet, n_periods, &[(settle + 32) as f64 * period])?;

    let steady = &background.output[start..];
    let background_residual = steady.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let avalanche_peak = with_avalanche.output[start..]
        .iter()
        .zip(&background_quiet.output[start..])
        .fold(f64::NEG_INFINITY, |m, (a, b)| m.max(a - b));
    let half_pp = |v: &[f64]| {
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        0.5 * (hi - lo)
    };
    Ok(Rejection {
        background_residual,
        avalanche_peak,
        ratio_db: 20.0 * libm::log10(avalanche_peak / background_residual),
        filtered_background: half_pp(&background_quiet.filtered[start..]),
        device_background: half_pp(&background_quiet.device[start..]),
    })
}

/// Renders an engine event stream through the chain and discriminates every
/// gate. Returns one detection flag per gate in `0..n_gates`.
pub fn detect_events(chain: &ChainConfig, events: &[EventRecord], n_gates: u64) -> Result<Vec<bool>> {
    let warmup = chain.warmup_periods;
    let offset = warmup as f64 / chain.f_g;
    let times: Vec<f64> = events.iter().filter(|e| e.gate_index < n_gates).map(|e| e.time + offset).collect();
    ensure(n_gates + (warmup as u64) < u32::MAX as u64, "n_gates fits in one buffer")?;
    let n_periods = (n_gates + warmup as u64 + 1) as u32;
    let out = run_chain(chain, n_periods, &times)?;
    let first_peak = libm::round(warmup as f64 * chain.samples_per_period()) as usize;
    let windows = gate_windows(chain, first_peak, n_gates);
    Ok(discriminate(&out.output, chain.threshold, &windows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spad::GateConfig;
    use crate::waveform::spectrum::tone_amplitude;
    use crate::waveform::NotchSpec;
    use alloc::vec;

    const F_G: f64 = 921e6;

    fn cfg() -> WaveformConfig {
        WaveformConfig::for_gate(F_G)
    }

    fn chain() -> ChainConfig {
        ChainConfig::for_gate(&GateConfig::operating_point())
    }

    #[test]
    fn gate_waveform_shape() {
        let c = cfg();
        let x = synth_gate_waveform(&c, F_G, 8).unwrap();
        let (lo, hi) = x.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        // 16 samples per period land exactly on peak and trough
        assert!((hi - lo - 12.0).abs() < 1e-12);
        assert!(x.iter().sum::<f64>().abs() < 1e-9);

        let one = synth_gate_waveform(&c, F_G, 1).unwrap();
        let span = one.len() as f64 * c.dt();
        assert!((span - 1.0857e-9).abs() < 1e-13, "{span}");

        let fs = c.sample_rate;
        let fund = tone_amplitude(&x, F_G, fs);
        for h in 2..8 {
            let a = tone_amplitude(&x, h as f64 * F_G, fs);
            assert!(20.0 * libm::log10(a / fund) < -80.0);
        }
    }

    #[test]
    fn sample_rate_below_sixteen_per_period_rejected() {
        let c = WaveformConfig { sample_rate: 8.0 * F_G, ..cfg() };
        assert!(synth_gate_waveform(&c, F_G, 1).is_err());
    }

    #[test]
    fn linear_device_is_scaled_sine() {
        let c = WaveformConfig { a2: 0.0, a4: 0.0, ..cfg() };
        let x = synth_gate_waveform(&c, F_G, 4).unwrap();
        let y = device_response(&x, &[], &c, F_G);
        for (a, b) in x.iter().zip(&y) {
            assert!((b - c.feedthrough_gain * a).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_term_creates_second_harmonic() {
        let c = WaveformConfig { a2: 0.1, a4: 0.0, ..cfg() };
        let x = synth_gate_waveform(&c, F_G, 16).unwrap();
        let y = device_response(&x, &[], &c, F_G);
        let fs = c.sample_rate;
        let h2 = tone_amplitude(&y, 2.0 * F_G, fs);
        // a2 x^2 = a2/2 (1 + cos 2wt)
        let expected = c.feedthrough_gain * 6.0 * 0.05;
        assert!((h2 - expected).abs() < 1e-9, "{h2} vs {expected}");
        let c0 = WaveformConfig { a2: 0.0, a4: 0.0, ..cfg() };
        let y0 = device_response(&x, &[], &c0, F_G);
        assert!(tone_amplitude(&y0, 2.0 * F_G, fs) < 1e-12);
    }

    #[test]
    fn avalanche_superposes_on_background() {
        let c = cfg();
        let x = synth_gate_waveform(&c, F_G, 8).unwrap();
        let bg = device_response(&x, &[], &c, F_G);
        let t = 3.0 / F_G;
        let av = device_response(&x, &[t], &c, F_G);
        let diff: Vec<f64> = av.iter().zip(&bg).map(|(a, b)| a - b).collect();
        let peak = diff.iter().cloned().fold(f64::MIN, f64::max);
        assert!((peak - c.avalanche_amp).abs() <= 0.05 * c.avalanche_amp, "{peak}");
        // confined between the avalanche and its gate close
        let dt = c.dt();
        for (i, d) in diff.iter().enumerate() {
            let ti = i as f64 * dt;
            if ti < t || ti >= t + 0.25 / F_G {
                assert_eq!(*d, 0.0, "sample {i}");
            }
        }
    }

    #[test]
    fn ideal_self_difference_cancels_periodic_input() {
        let c = cfg();
        let x = synth_gate_waveform(&c, F_G, 32).unwrap();
        let y = device_response(&x, &[], &c, F_G);
        let sd = SdConfig { amplitude_mismatch: 0.0, skew: 0.0, ..SdConfig::for_gate(F_G) };
        let z = self_difference(&y, &sd, c.sample_rate);
        assert!(z[16..].iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn mismatch_leaves_proportional_residual() {
        let c = WaveformConfig { a2: 0.0, a4: 0.0, ..cfg() };
        let x = synth_gate_waveform(&c, F_G, 32).unwrap();
        let sd = SdConfig { amplitude_mismatch: 0.01, skew: 0.0, ..SdConfig::for_gate(F_G) };
        let z = self_difference(&x, &sd, c.sample_rate);
        let amp = z[16..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((amp - 0.01 * 6.0).abs() < 1e-9, "{amp}");
    }

    #[test]
    fn isolated_pulse_appears_twice_with_opposite_sign() {
        let mut x = vec![0.0; 64];
        x[20] = 1.0;
        let sd = SdConfig { amplitude_mismatch: 0.0, skew: 0.0, delay: 16.0 };
        let y = self_difference(&x, &sd, 1.0);
        assert_eq!(y[20], 1.0);
        assert_eq!(y[36], -1.0);
        assert_eq!(y.iter().filter(|v| **v != 0.0).count(), 2);
    }

    #[test]
    fn fractional_skew_interpolates() {
        let x: Vec<f64> = (0..64).map(|i| i as f64).collect();
        let sd = SdConfig { amplitude_mismatch: 0.0, skew: 0.5, delay: 16.0 };
        let y = self_difference(&x, &sd, 1.0);
        assert!((y[40] - 16.5).abs() < 1e-12);
    }

    #[test]
    fn discriminator_basics() {
        let zeros = vec![0.0; 160];
        let c = chain();
        let windows = gate_windows(&c, 0, 10);
        assert!(discriminate(&zeros, 1e-3, &windows).iter().all(|f| !f));
        let mut x = zeros.clone();
        x[16 * 4 + 2] = 2e-3;
        x[16 * 4 + 3] = 1.5e-3;
        let flags = discriminate(&x, 1e-3, &windows);
        assert_eq!(flags.iter().filter(|f| **f).count(), 1);
        assert!(flags[4]);
    }

    #[test]
    fn default_chain_levels() {
        let r = measure_rejection(&chain()).unwrap();
        assert!(r.background_residual < 1e-3);
        assert!((r.avalanche_peak - 2e-3).abs() <= 0.25 * 2e-3);
        assert!(r.filtered_background < 40e-3);
    }

    #[test]
    fn residual_vanishes_in_ideal_limit() {
        let mut c = chain();
        c.sd.amplitude_mismatch = 0.0;
        let r = measure_rejection(&c).unwrap();
        assert!(r.background_residual < 1e-12, "{}", r.background_residual);

        // With mismatch, residual tracks the notch depth.
        let residual = |depth: f64| {
            let mut c = chain();
            c.sd.amplitude_mismatch = 1e-3;
            c.notches = c.notches.iter().map(|n| NotchSpec { attenuation_db: depth, ..*n }).collect();
            measure_rejection(&c).unwrap().background_residual
        };
        let (r30, r50, r70) = (residual(30.0), residual(50.0), residual(70.0));
        assert!(r50 < r30 && r70 < r50, "{r30} {r50} {r70}");
    }

    #[test]
    fn amplifier_gain_scales_levels() {
        let mut c = chain();
        c.waveform.amp2_gain_db = 0.0;
        let flat = measure_rejection(&c).unwrap();
        c.waveform.amp2_gain_db = 20.0;
        let amped = measure_rejection(&c).unwrap();
        assert!((amped.background_residual / flat.background_residual - 10.0).abs() < 1e-9);
        assert!((amped.avalanche_peak / flat.avalanche_peak - 10.0).abs() < 1e-9);
    }
}
