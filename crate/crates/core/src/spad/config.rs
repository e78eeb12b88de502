use crate::error::{ensure, Result};

/// Temporal shape of the gate's detection-efficiency profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Profile {
    /// Gaussian whose FWHM is the effective gate width.
    #[default]
    Gaussian,
    /// Flat top of width equal to the effective gate width.
    Rectangular,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Gaussian => "gaussian",
            Profile::Rectangular => "rectangular",
        }
    }
}

/// Gating parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateConfig {
    /// Gate frequency, Hz.
    pub f_g: f64,
    /// Effective gate width (FWHM of the efficiency profile), seconds.
    pub delta_t: f64,
    pub profile: Profile,
    /// Count-off time after each counted avalanche, seconds.
    pub count_off: f64,
}

impl GateConfig {
    /// 921 MHz sine gating with a 154 ps effective width and a 10 ns count-off.
    pub fn operating_point() -> Self {
        Self { f_g: 921e6, delta_t: 154e-12, profile: Profile::Gaussian, count_off: 10e-9 }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.f_g.is_finite() && self.f_g > 0.0, "f_g > 0")?;
        ensure(self.delta_t.is_finite() && self.delta_t > 0.0, "delta_t > 0")?;
        ensure(self.delta_t < 1.0 / self.f_g, "delta_t < 1/f_g")?;
        ensure(self.count_off.is_finite() && self.count_off >= 0.0, "count_off >= 0")
    }

    #[inline]
    pub fn period(&self) -> f64 {
        1.0 / self.f_g
    }

    /// Time of the peak of gate `index`.
    #[inline]
    pub fn gate_time(&self, index: u64) -> f64 {
        index as f64 / self.f_g
    }

    /// Fraction of time the detector is effectively open.
    pub fn duty_cycle(&self) -> f64 {
        self.f_g * self.delta_t
    }
}

/// Pulsed laser illuminating every `divider`-th gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonSource {
    /// Mean photon number per pulse.
    pub mu: f64,
    /// Gates per laser pulse; gate `n` is illuminated iff `n % divider == 0`.
    pub divider: u32,
    /// Pulse arrival relative to the gate peak, seconds.
    pub delay: f64,
    /// Optical pulse FWHM, seconds.
    pub pulse_width: f64,
    /// Convolve the pulse shape with the gate profile instead of treating the
    /// pulse as instantaneous.
    pub convolve_pulse: bool,
}

impl Default for PhotonSource {
    fn default() -> Self {
        Self { mu: 0.1, divider: 12, delay: 0.0, pulse_width: 30e-12, convolve_pulse: false }
    }
}

impl PhotonSource {
    pub fn validate(&self, gate: &GateConfig) -> Result<()> {
        ensure(self.mu.is_finite() && self.mu >= 0.0, "mu >= 0")?;
        ensure(self.divider >= 1, "divider >= 1")?;
        ensure(self.delay.is_finite() && self.delay.abs() < 0.5 * gate.period(), "|delay| < 1/(2 f_g)")?;
        ensure(self.pulse_width.is_finite() && self.pulse_width >= 0.0, "pulse_width >= 0")
    }

    /// Laser repetition rate `f_g / divider`.
    #[inline]
    pub fn f_p(&self, gate: &GateConfig) -> f64 {
        gate.f_g / self.divider as f64
    }

    #[inline]
    pub fn illuminates(&self, gate_index: u64) -> bool {
        gate_index.is_multiple_of(self.divider as u64)
    }
}

/// Carrier trapping and release.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AfterpulseModel {
    /// Mean number of trapped carriers per avalanche (Poisson).
    pub mean_traps_per_avalanche: f64,
    /// Exponential detrapping lifetime, seconds.
    pub detrap_lifetime: f64,
    /// Probability that a release inside an open window fires an avalanche.
    pub trigger_prob: f64,
}

impl AfterpulseModel {
    /// Trap population calibrated so that the afterpulse estimator reads
    /// 3.4 % at the 921 MHz operating point (mu = 0.1, divider 12, 10 ns
    /// count-off, eta = 9.3 %), from 2e9 gates at master seed 0. Regenerate
    /// with the `calibrate-afterpulse` command.
    pub const CALIBRATED_MEAN_TRAPS: f64 = 0.5138;
    pub const DEFAULT_TRIGGER_PROB: f64 = 0.5;
    pub const DEFAULT_LIFETIME: f64 = 1e-6;

    pub fn disabled() -> Self {
        Self {
            mean_traps_per_avalanche: 0.0,
            detrap_lifetime: Self::DEFAULT_LIFETIME,
            trigger_prob: Self::DEFAULT_TRIGGER_PROB,
        }
    }

    pub fn calibrated() -> Self {
        Self {
            mean_traps_per_avalanche: Self::CALIBRATED_MEAN_TRAPS,
            detrap_lifetime: Self::DEFAULT_LIFETIME,
            trigger_prob: Self::DEFAULT_TRIGGER_PROB,
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.mean_traps_per_avalanche > 0.0 && self.trigger_prob > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            self.mean_traps_per_avalanche.is_finite() && self.mean_traps_per_avalanche >= 0.0,
            "mean_traps_per_avalanche >= 0",
        )?;
        ensure(self.mean_traps_per_avalanche <= 100.0, "mean_traps_per_avalanche <= 100")?;
        ensure(self.detrap_lifetime.is_finite() && self.detrap_lifetime >= 0.0, "detrap_lifetime >= 0")?;
        ensure((0.0..=1.0).contains(&self.trigger_prob), "0 <= trigger_prob <= 1")
    }
}

impl Default for AfterpulseModel {
    fn default() -> Self {
        Self::calibrated()
    }
}

/// Ground truth of the simulated device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorTruth {
    /// Peak detection efficiency.
    pub eta: f64,
    /// Dark count probability per effective open nanosecond.
    pub p_dc_ns: f64,
    pub afterpulse: AfterpulseModel,
}

impl DetectorTruth {
    /// Device #1 at 921 MHz: eta 9.3 %, 2.8e-6 dark counts per ns.
    pub fn operating_point() -> Self {
        Self { eta: 0.093, p_dc_ns: 2.8e-6, afterpulse: AfterpulseModel::calibrated() }
    }

    pub fn validate(&self) -> Result<()> {
        ensure((0.0..=1.0).contains(&self.eta), "0 <= eta <= 1")?;
        ensure(self.p_dc_ns.is_finite() && self.p_dc_ns >= 0.0, "p_dc_ns >= 0")?;
        self.afterpulse.validate()
    }
}
