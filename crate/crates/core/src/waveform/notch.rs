use alloc::vec::Vec;

use super::config::NotchSpec;
use crate::error::Result;

/// Second-order section in transposed direct form II.
#[derive(Debug, Clone, Copy, Default)]
pub struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
    z1: f64,
    z2: f64,
}

impl Biquad {
    /// Finite-depth notch: a peaking section with negative gain. The response
    /// is exactly `-attenuation_db` at `center` and unity at DC and Nyquist.
    pub fn notch(spec: &NotchSpec, sample_rate: f64) -> Self {
        let a = libm::pow(10.0, -spec.attenuation_db / 40.0);
        let w0 = core::f64::consts::TAU * spec.center / sample_rate;
        let (sin, cos) = libm::sincos(w0);
        let alpha = sin / (2.0 * spec.q);
        let a0 = 1.0 + alpha / a;
        Self {
            b0: (1.0 + alpha * a) / a0,
            b1: -2.0 * cos / a0,
            b2: (1.0 - alpha * a) / a0,
            a1: -2.0 * cos / a0,
            a2: (1.0 - alpha / a) / a0,
            z1: 0.0,
            z2: 0.0,
        }
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.z1;
        self.z1 = self.b1 * x - self.a1 * y + self.z2;
        self.z2 = self.b2 * x - self.a2 * y;
        y
    }

    /// Magnitude response at `freq`.
    pub fn gain_at(&self, freq: f64, sample_rate: f64) -> f64 {
        let w = core::f64::consts::TAU * freq / sample_rate;
        let (s1, c1) = libm::sincos(w);
        let (s2, c2) = libm::sincos(2.0 * w);
        let nr = self.b0 + self.b1 * c1 + self.b2 * c2;
        let ni = -(self.b1 * s1 + self.b2 * s2);
        let dr = 1.0 + self.a1 * c1 + self.a2 * c2;
        let di = -(self.a1 * s1 + self.a2 * s2);
        libm::sqrt((nr * nr + ni * ni) / (dr * dr + di * di))
    }
}

/// Runs `samples` through a cascade of fresh notch sections.
pub fn apply_notch_bank(samples: &[f64], specs: &[NotchSpec], sample_rate: f64) -> Result<Vec<f64>> {
    crate::error::ensure(!specs.is_empty(), "notch bank non-empty")?;
    for s in specs {
        s.validate(sample_rate)?;
    }
    let mut out = samples.to_vec();
    for spec in specs {
        let mut section = Biquad::notch(spec, sample_rate);
        for v in out.iter_mut() {
            *v = section.process(*v);
        }
    }
    Ok(out)
}
