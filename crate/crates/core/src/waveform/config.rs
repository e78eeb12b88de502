use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ensure, Result};
use crate::spad::GateConfig;

/// Analog parameters of the gate drive and device output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveformConfig {
    /// Samples per second.
    pub sample_rate: f64,
    /// Peak-to-peak gate amplitude at the diode, volts.
    pub v_pp: f64,
    /// DC bias, volts. Carried as metadata.
    pub v_dc: f64,
    /// Fraction of the gate amplitude coupled to the output.
    pub feedthrough_gain: f64,
    /// Quadratic coefficient of the device nonlinearity (source of 2 f_g).
    pub a2: f64,
    /// Quartic coefficient (source of 4 f_g).
    pub a4: f64,
    /// Avalanche step amplitude at the device output, volts.
    pub avalanche_amp: f64,
    /// Linear rise time of the avalanche step, seconds.
    pub avalanche_rise: f64,
    /// Gain of the amplifier in front of the discriminator, dB.
    pub amp2_gain_db: f64,
    /// RMS of white noise added at the discriminator input, volts.
    pub noise_rms: f64,
}

impl WaveformConfig {
    pub const SAMPLES_PER_PERIOD: f64 = 16.0;

    pub fn for_gate(f_g: f64) -> Self {
        Self {
            sample_rate: Self::SAMPLES_PER_PERIOD * f_g,
            v_pp: 12.0,
            v_dc: 55.0,
            feedthrough_gain: 0.15,
            a2: 0.05,
            a4: 0.02,
            avalanche_amp: 0.455e-3,
            avalanche_rise: 50e-12,
            amp2_gain_db: 20.0,
            noise_rms: 0.0,
        }
    }

    pub fn validate(&self, f_g: f64) -> Result<()> {
        ensure(
            self.sample_rate.is_finite() && self.sample_rate >= 16.0 * f_g * (1.0 - 1e-12),
            "sample_rate >= 16 f_g",
        )?;
        ensure(self.v_pp.is_finite() && self.v_pp > 0.0, "v_pp > 0")?;
        ensure(
            [self.feedthrough_gain, self.a2, self.a4, self.amp2_gain_db, self.v_dc].iter().all(|g| g.is_finite()),
            "gains finite",
        )?;
        ensure(
            self.avalanche_amp.is_finite() && self.avalanche_rise.is_finite() && self.avalanche_rise >= 0.0,
            "avalanche_rise >= 0",
        )?;
        ensure(self.noise_rms.is_finite() && self.noise_rms >= 0.0, "noise_rms >= 0")
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }
}

/// One band-stop section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotchSpec {
    pub center: f64,
    /// Depth at the center frequency, dB.
    pub attenuation_db: f64,
    pub q: f64,
}

impl NotchSpec {
    pub const DEFAULT_Q: f64 = 5.0;

    pub fn new(center: f64, attenuation_db: f64) -> Self {
        Self { center, attenuation_db, q: Self::DEFAULT_Q }
    }

    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        ensure(self.center > 0.0 && self.center < 0.5 * sample_rate, "0 < center < sample_rate/2")?;
        ensure(self.attenuation_db > 0.0, "attenuation_db > 0")?;
        ensure(self.q.is_finite() && self.q > 0.0, "q > 0")
    }
}

/// Self-differencing delay line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdConfig {
    /// Nominal delay, one gate period.
    pub delay: f64,
    /// `|gain ratio - 1|` of the delayed arm.
    pub amplitude_mismatch: f64,
    /// Delay error, seconds.
    pub skew: f64,
}

impl SdConfig {
    pub fn for_gate(f_g: f64) -> Self {
        Self { delay: 1.0 / f_g, amplitude_mismatch: 5e-4, skew: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.delay.is_finite() && self.delay > 0.0, "delay > 0")?;
        ensure(self.amplitude_mismatch >= 0.0, "amplitude_mismatch >= 0")?;
        ensure(self.skew >= 0.0, "skew >= 0")
    }
}

/// Everything needed to run the detection chain for one gate frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub f_g: f64,
    pub waveform: WaveformConfig,
    pub notches: Vec<NotchSpec>,
    pub sd: SdConfig,
    /// Discriminator threshold at the amplifier output, volts.
    pub threshold: f64,
    /// Periods simulated before gate 0 so filters reach steady state.
    pub warmup_periods: u32,
    /// Discriminator window per gate as fractions of a period relative to
    /// the gate peak, `[start, end)`.
    pub window: (f64, f64),
    pub noise_seed: u64,
}

impl ChainConfig {
    /// Notches at f_g, 2 f_g and 4 f_g with 30 dB depth, 1 mV threshold.
    pub fn for_gate(gate: &GateConfig) -> Self {
        let f_g = gate.f_g;
        Self {
            f_g,
            waveform: WaveformConfig::for_gate(f_g),
            notches: vec![NotchSpec::new(f_g, 30.0), NotchSpec::new(2.0 * f_g, 30.0), NotchSpec::new(4.0 * f_g, 30.0)],
            sd: SdConfig::for_gate(f_g),
            threshold: 1e-3,
            warmup_periods: 128,
            window: (0.0, 0.625),
            noise_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.f_g.is_finite() && self.f_g > 0.0, "f_g > 0")?;
        self.waveform.validate(self.f_g)?;
        ensure(!self.notches.is_empty(), "notch bank non-empty")?;
        for n in &self.notches {
            n.validate(self.waveform.sample_rate)?;
        }
        self.sd.validate()?;
        ensure(self.threshold > 0.0, "threshold > 0")?;
        ensure(
            self.window.0 < self.window.1 && self.window.1 - self.window.0 <= 1.0,
            "window start < end, width <= one period",
        )
    }

    pub fn samples_per_period(&self) -> f64 {
        self.waveform.sample_rate / self.f_g
    }

    /// Linear gain of the amplifier.
    pub fn amp_gain(&self) -> f64 {
        libm::pow(10.0, self.waveform.amp2_gain_db / 20.0)
    }
}
