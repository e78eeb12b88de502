use super::config::{GateConfig, PhotonSource, Profile};
use crate::units::NS;

const FOUR_LN2: f64 = 4.0 * core::f64::consts::LN_2;

/// Probability that at least one photon of a Poisson pulse with mean
/// `mu_eff` is detected with efficiency `eta`.
#[inline]
pub fn per_gate_photon_prob(mu_eff: f64, eta: f64) -> f64 {
    -libm::expm1(-mu_eff * eta)
}

/// Dark avalanche probability of one gate, `p_dc_ns * delta_t`, clamped to 1.
#[inline]
pub fn dark_prob_per_gate(p_dc_ns: f64, delta_t: f64) -> f64 {
    (p_dc_ns * delta_t / NS).min(1.0)
}

/// Detection efficiency for a pulse arriving `delay` seconds from the gate
/// peak. Equals `eta_peak` at zero delay and `eta_peak / 2` at `delta_t / 2`
/// for the gaussian profile.
pub fn gate_profile_efficiency(delay: f64, config: &GateConfig, eta_peak: f64) -> f64 {
    match config.profile {
        Profile::Gaussian => {
            let r = delay / config.delta_t;
            eta_peak * libm::exp(-FOUR_LN2 * r * r)
        }
        Profile::Rectangular => {
            if delay.abs() <= 0.5 * config.delta_t {
                eta_peak
            } else {
                0.0
            }
        }
    }
}

/// Relative efficiency seen by the source's pulses. With `convolve_pulse`
/// the gaussian optical pulse (unit area) is convolved with the gate profile.
pub fn profile_factor(config: &GateConfig, source: &PhotonSource) -> f64 {
    if !source.convolve_pulse || source.pulse_width <= 0.0 {
        return gate_profile_efficiency(source.delay, config, 1.0);
    }
    let w = source.pulse_width;
    match config.profile {
        Profile::Gaussian => {
            let dt = config.delta_t;
            let total = libm::sqrt(dt * dt + w * w);
            let r = source.delay / total;
            dt / total * libm::exp(-FOUR_LN2 * r * r)
        }
        Profile::Rectangular => {
            let sigma = w / (2.0 * libm::sqrt(2.0 * core::f64::consts::LN_2));
            let h = 0.5 * config.delta_t;
            let s2 = sigma * core::f64::consts::SQRT_2;
            0.5 * (libm::erf((h - source.delay) / s2) + libm::erf((h + source.delay) / s2))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::PS;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn photon_prob_examples() {
        assert_eq!(per_gate_photon_prob(0.0, 0.5), 0.0);
        // 1 - exp(-0.0093)
        assert!(close(per_gate_photon_prob(0.1, 0.093), 0.009_256_882, 1e-6));
        assert_eq!(per_gate_photon_prob(1e6, 0.093), 1.0);
    }

    #[test]
    fn dark_prob_examples() {
        let p = dark_prob_per_gate(2.8e-6, 154.0 * PS);
        assert!(close(p, 4.312e-7, 1e-9));
        // printed value 4.3e-7 per gate
        assert!(close(p, 4.3e-7, 0.01));
        assert_eq!(dark_prob_per_gate(0.0, 154.0 * PS), 0.0);
        assert!(close(dark_prob_per_gate(1.5e-5, 170.0 * PS), 2.55e-6, 1e-9));
        assert_eq!(dark_prob_per_gate(1e9, 154.0 * PS), 1.0);
    }

    #[test]
    fn profile_examples() {
        let g = GateConfig::operating_point();
        assert_eq!(gate_profile_efficiency(0.0, &g, 0.093), 0.093);
        assert!(close(gate_profile_efficiency(g.delta_t / 2.0, &g, 0.093), 0.0465, 1e-12));
        assert!(close(gate_profile_efficiency(g.delta_t, &g, 0.093), 0.005_812_5, 1e-12));
        let r = GateConfig { profile: Profile::Rectangular, ..g };
        assert_eq!(gate_profile_efficiency(0.0, &r, 0.093), 0.093);
        assert_eq!(gate_profile_efficiency(0.5 * r.delta_t, &r, 0.5), 0.5);
        assert_eq!(gate_profile_efficiency(0.51 * r.delta_t, &r, 0.5), 0.0);
    }

    #[test]
    fn convolution_preserves_area() {
        // Area under the delay curve is conserved by convolving with a unit pulse.
        let g = GateConfig::operating_point();
        for profile in [Profile::Gaussian, Profile::Rectangular] {
            let g = GateConfig { profile, ..g };
            let area = |convolve: bool| {
                let n = 4001;
                let span = 1.0e-9;
                let step = span / (n - 1) as f64;
                (0..n)
                    .map(|i| {
                        let s = PhotonSource {
                            delay: -0.5 * span + i as f64 * step,
                            convolve_pulse: convolve,
                            ..PhotonSource::default()
                        };
                        profile_factor(&g, &s) * step
                    })
                    .sum::<f64>()
            };
            let (plain, conv) = (area(false), area(true));
            assert!(close(conv, plain, 2e-3), "{profile:?}: {plain} vs {conv}");
        }
        // 30 ps on 154 ps: peak drops by under 2 %
        let s = PhotonSource { convolve_pulse: true, ..PhotonSource::default() };
        let f = profile_factor(&g, &s);
        assert!(f < 1.0 && f > 0.98, "{f}");
    }
}
