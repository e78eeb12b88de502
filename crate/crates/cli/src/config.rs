//! TOML run configuration.
//!
//! Only `gate.f_g`, `gate.delta_t` and `detector.eta` are required; every
//! other key has a default. [`RunConfig::echo`] writes the fully resolved
//! configuration, and parsing that text gives back the same configuration.

use std::path::PathBuf;

use rapidgate_core::experiments::{CalibrationSpec, Scenario};
use rapidgate_core::spad::{AfterpulseModel, DetectorTruth, GateConfig, PhotonSource, Profile};
use rapidgate_core::waveform::{ChainConfig, NotchSpec, SdConfig, WaveformConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::units::{self, Unit};

/// A TOML number or a quantity string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Int(i64),
    Float(f64),
    Text(String),
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output_dir: Option<String>,
    gate: Option<RawGate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    source: Option<RawSource>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detector: Option<RawDetector>,
    #[serde(skip_serializing_if = "Option::is_none")]
    waveform: Option<RawWaveform>,
    #[serde(skip_serializing_if = "Option::is_none")]
    simulate: Option<RawSimulate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delay_scan: Option<RawDelayScan>,
    #[serde(skip_serializing_if = "Option::is_none")]
    efficiency_sweep: Option<RawEfficiency>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu_sweep: Option<RawMu>,
    #[serde(skip_serializing_if = "Option::is_none")]
    calibration: Option<RawCalibration>,
    #[serde(skip_serializing_if = "Option::is_none")]
    checks: Option<RawChecks>,
}

macro_rules! raw_section {
    ($name:ident { $($field:ident : $ty:ty),* $(,)? }) => {
        #[derive(Debug, Default, Clone, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        struct $name {
            $(
                #[serde(skip_serializing_if = "Option::is_none")]
                $field: Option<$ty>,
            )*
        }
    };
}

raw_section!(RawGate { f_g: Scalar, delta_t: Scalar, profile: String, count_off: Scalar });
raw_section!(RawSource { mu: Scalar, divider: Scalar, delay: Scalar, pulse_width: Scalar, convolve_pulse: bool });
raw_section!(RawAfterpulse { mean_traps_per_avalanche: Scalar, detrap_lifetime: Scalar, trigger_prob: Scalar });
raw_section!(RawSd { delay: Scalar, amplitude_mismatch: Scalar, skew: Scalar });
raw_section!(RawNotch { center: Scalar, attenuation_db: Scalar, q: Scalar });
raw_section!(RawSimulate { n_gates: Scalar, events: bool });
raw_section!(RawDelayScan { span: Scalar, step: Scalar, n_gates: Scalar });
raw_section!(RawEfficiency { values: Vec<Scalar>, n_gates: Scalar });
raw_section!(RawMu {
    min: Scalar,
    max: Scalar,
    per_decade: Scalar,
    n_gates: Scalar,
    continuous_mu: Scalar,
    continuous_gates: Scalar,
});
raw_section!(RawCalibration { target_p_ap: Scalar, n_gates: Scalar, tolerance: Scalar, max_iterations: Scalar });
raw_section!(RawChecks { n_sigma: Scalar, p_ap_range: Vec<Scalar>, p_ap_ns_range: Vec<Scalar> });

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetector {
    #[serde(skip_serializing_if = "Option::is_none")]
    eta: Option<Scalar>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_dc_ns: Option<Scalar>,
    #[serde(skip_serializing_if = "Option::is_none")]
    afterpulse: Option<RawAfterpulse>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWaveform {
    #[serde(skip_serializing_if = "Option::is_none")]
    sample_rate: Option<Scalar>,
    #[serde(skip_serializing_if = "Option::is_none")]
    v_pp: Option<Scalar>,
    #[serde(skip_serializing_if = "Option::is_none")]
    v_dc: Option<Scalar>,
    #[serde(skip_serializing_if = "Option::is_none")]
    feedthrough_gain: Option<Scalar>,
    #[serde(skip_serializing_if = "Option::is_none")]
    a2: Option<Scalar>,
    #[serde(skip_serializing_if = "Option::is_none")]
    a4: Option<Scalar>,
    #[serde(skip_serializing_if = "Option::is_none")]
    avalanche_amp: Option<Scalar>,
    #[serde(skip_serializing_if = "Option::is_none")]
    avalanche_rise: Option<Scalar>,
    #[serde(skip_serializing_if = "Option::is_none")]
    amp2_gain_db: Option<Scalar>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_rms: Option<Scalar>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<Scalar>,
    #[serde(skip_serializing_if = "Option::is_none")]
    warmup_periods: Option<Scalar>,
    #[serde(skip_serializing_if = "Option::is_none")]
    window: Option<Vec<Scalar>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_periods: Option<Scalar>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pipeline_gates: Option<Scalar>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sd: Option<RawSd>,
    #[serde(skip_serializing_if = "Option::is_none")]
    notch: Option<Vec<RawNotch>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSettings {
    pub n_gates: u64,
    /// Write the illuminated event stream.
    pub events: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayScanSettings {
    pub span: f64,
    pub step: f64,
    pub n_gates: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencySettings {
    pub values: Vec<f64>,
    pub n_gates: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuSettings {
    pub min: f64,
    pub max: f64,
    pub per_decade: u32,
    pub n_gates: u64,
    pub continuous_mu: f64,
    pub continuous_gates: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSettings {
    pub target_p_ap: f64,
    pub n_gates: u64,
    pub tolerance: f64,
    pub max_iterations: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveformRun {
    /// Periods rendered for the background and avalanche traces.
    pub n_periods: u32,
    /// Gates compared between the engine and the discriminator; 0 skips it.
    pub pipeline_gates: u64,
}

/// Tolerance gates enforced with `--check`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckSettings {
    /// Width of the band, in standard errors, that recovered ground truth
    /// must fall in.
    pub n_sigma: f64,
    pub p_ap_range: Option<[f64; 2]>,
    pub p_ap_ns_range: Option<[f64; 2]>,
}

/// Fully resolved and validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub gate: GateConfig,
    /// Laser settings as written; a mean photon number `<= 0` means no
    /// source.
    pub source: PhotonSource,
    pub detector: DetectorTruth,
    pub chain: ChainConfig,
    pub waveform_run: WaveformRun,
    pub simulate: SimulateSettings,
    pub delay_scan: DelayScanSettings,
    pub efficiency: EfficiencySettings,
    pub mu_sweep: MuSettings,
    pub calibration: CalibrationSettings,
    pub checks: CheckSettings,
}

struct Ctx<'a> {
    section: &'a str,
}

impl Ctx<'_> {
    fn bad(&self, key: &str, reason: impl Into<String>) -> CliError {
        CliError::Value { key: format!("{}{}", self.section, key), reason: reason.into() }
    }

    fn num(&self, key: &str, v: Option<&Scalar>, default: f64) -> Result<f64, CliError> {
        match v {
            None => Ok(default),
            Some(Scalar::Int(i)) => Ok(*i as f64),
            Some(Scalar::Float(f)) => Ok(*f),
            Some(Scalar::Text(t)) => t.trim().parse().map_err(|_| self.bad(key, "expected a number")),
        }
    }

    fn qty(&self, key: &str, v: Option<&Scalar>, unit: Unit, default: f64) -> Result<f64, CliError> {
        match v {
            Some(Scalar::Text(t)) => units::parse(t, unit).map_err(|e| self.bad(key, e.to_string())),
            other => self.num(key, other, default),
        }
    }

    fn required_qty(&self, key: &str, v: Option<&Scalar>, unit: Unit) -> Result<f64, CliError> {
        let v = v.ok_or_else(|| self.bad(key, "required key missing"))?;
        self.qty(key, Some(v), unit, f64::NAN)
    }

    fn count(&self, key: &str, v: Option<&Scalar>, default: u64) -> Result<u64, CliError> {
        let x = self.num(key, v, default as f64)?;
        if x < 0.0 || x.fract() != 0.0 || x > 2f64.powi(53) {
            return Err(self.bad(key, "expected a non-negative integer"));
        }
        Ok(x as u64)
    }

    fn pair(&self, key: &str, v: &[Scalar]) -> Result<[f64; 2], CliError> {
        if v.len() != 2 {
            return Err(self.bad(key, "expected two numbers"));
        }
        Ok([self.num(key, Some(&v[0]), 0.0)?, self.num(key, Some(&v[1]), 0.0)?])
    }
}

/// Parses and validates a configuration file.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = match e.span() {
            Some(span) => line_col(text, span.start),
            None => (0, 0),
        };
        CliError::Syntax { message: e.message().to_string(), line, column }
    })?;
    let cfg = resolve(raw)?;
    cfg.validate()?;
    Ok(cfg)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn resolve(raw: RawConfig) -> Result<RunConfig, CliError> {
    let g = raw.gate.unwrap_or_default();
    let c = Ctx { section: "gate." };
    let f_g = c.required_qty("f_g", g.f_g.as_ref(), Unit::Hertz)?;
    let op = GateConfig::operating_point();
    let gate = GateConfig {
        f_g,
        delta_t: c.required_qty("delta_t", g.delta_t.as_ref(), Unit::Second)?,
        profile: match g.profile.as_deref() {
            None | Some("gaussian") => Profile::Gaussian,
            Some("rectangular") => Profile::Rectangular,
            Some(_) => return Err(c.bad("profile", "expected \"gaussian\" or \"rectangular\"")),
        },
        count_off: c.qty("count_off", g.count_off.as_ref(), Unit::Second, op.count_off)?,
    };

    let s = raw.source.unwrap_or_default();
    let c = Ctx { section: "source." };
    let d = PhotonSource::default();
    let divider = c.count("divider", s.divider.as_ref(), d.divider as u64)?;
    let source = PhotonSource {
        mu: c.num("mu", s.mu.as_ref(), d.mu)?,
        divider: u32::try_from(divider).map_err(|_| c.bad("divider", "too large"))?,
        delay: c.qty("delay", s.delay.as_ref(), Unit::Second, d.delay)?,
        pulse_width: c.qty("pulse_width", s.pulse_width.as_ref(), Unit::Second, d.pulse_width)?,
        convolve_pulse: s.convolve_pulse.unwrap_or(d.convolve_pulse),
    };

    let det = raw.detector.unwrap_or_default();
    let c = Ctx { section: "detector." };
    let eta = c.num("eta", Some(det.eta.as_ref().ok_or_else(|| c.bad("eta", "required key missing"))?), 0.0)?;
    let p_dc_ns = c.num("p_dc_ns", det.p_dc_ns.as_ref(), DetectorTruth::operating_point().p_dc_ns)?;
    let ap = det.afterpulse.unwrap_or_default();
    let c = Ctx { section: "detector.afterpulse." };
    let da = AfterpulseModel::calibrated();
    let afterpulse = AfterpulseModel {
        mean_traps_per_avalanche: c.num(
            "mean_traps_per_avalanche",
            ap.mean_traps_per_avalanche.as_ref(),
            da.mean_traps_per_avalanche,
        )?,
        detrap_lifetime: c.qty("detrap_lifetime", ap.detrap_lifetime.as_ref(), Unit::Second, da.detrap_lifetime)?,
        trigger_prob: c.num("trigger_prob", ap.trigger_prob.as_ref(), da.trigger_prob)?,
    };
    let detector = DetectorTruth { eta, p_dc_ns, afterpulse };

    let w = raw.waveform.unwrap_or_default();
    let c = Ctx { section: "waveform." };
    let dc = ChainConfig::for_gate(&gate);
    let dw = dc.waveform;
    let waveform = WaveformConfig {
        sample_rate: c.qty("sample_rate", w.sample_rate.as_ref(), Unit::Hertz, dw.sample_rate)?,
        v_pp: c.qty("v_pp", w.v_pp.as_ref(), Unit::Volt, dw.v_pp)?,
        v_dc: c.qty("v_dc", w.v_dc.as_ref(), Unit::Volt, dw.v_dc)?,
        feedthrough_gain: c.num("feedthrough_gain", w.feedthrough_gain.as_ref(), dw.feedthrough_gain)?,
        a2: c.num("a2", w.a2.as_ref(), dw.a2)?,
        a4: c.num("a4", w.a4.as_ref(), dw.a4)?,
        avalanche_amp: c.qty("avalanche_amp", w.avalanche_amp.as_ref(), Unit::Volt, dw.avalanche_amp)?,
        avalanche_rise: c.qty("avalanche_rise", w.avalanche_rise.as_ref(), Unit::Second, dw.avalanche_rise)?,
        amp2_gain_db: c.num("amp2_gain_db", w.amp2_gain_db.as_ref(), dw.amp2_gain_db)?,
        noise_rms: c.qty("noise_rms", w.noise_rms.as_ref(), Unit::Volt, dw.noise_rms)?,
    };
    let sd_raw = w.sd.unwrap_or_default();
    let cs = Ctx { section: "waveform.sd." };
    let sd = SdConfig {
        delay: cs.qty("delay", sd_raw.delay.as_ref(), Unit::Second, dc.sd.delay)?,
        amplitude_mismatch: cs.num(
            "amplitude_mismatch",
            sd_raw.amplitude_mismatch.as_ref(),
            dc.sd.amplitude_mismatch,
        )?,
        skew: cs.qty("skew", sd_raw.skew.as_ref(), Unit::Second, dc.sd.skew)?,
    };
    let notches = match w.notch {
        None => dc.notches.clone(),
        Some(list) => {
            let cn = Ctx { section: "waveform.notch." };
            list.iter()
                .map(|n| {
                    let center = cn.required_qty("center", n.center.as_ref(), Unit::Hertz)?;
                    let mut spec = NotchSpec::new(center, cn.num("attenuation_db", n.attenuation_db.as_ref(), 30.0)?);
                    spec.q = cn.num("q", n.q.as_ref(), spec.q)?;
                    Ok(spec)
                })
                .collect::<Result<Vec<_>, CliError>>()?
        }
    };
    let window = match &w.window {
        None => dc.window,
        Some(v) => {
            let [a, b] = c.pair("window", v)?;
            (a, b)
        }
    };
    let warmup = c.count("warmup_periods", w.warmup_periods.as_ref(), dc.warmup_periods as u64)?;
    let chain = ChainConfig {
        f_g,
        waveform,
        notches,
        sd,
        threshold: c.qty("threshold", w.threshold.as_ref(), Unit::Volt, dc.threshold)?,
        warmup_periods: u32::try_from(warmup).map_err(|_| c.bad("warmup_periods", "too large"))?,
        window,
        noise_seed: w.noise_seed.unwrap_or(dc.noise_seed),
    };
    let n_periods = c.count("n_periods", w.n_periods.as_ref(), 64)?;
    let waveform_run = WaveformRun {
        n_periods: u32::try_from(n_periods).map_err(|_| c.bad("n_periods", "too large"))?,
        pipeline_gates: c.count("pipeline_gates", w.pipeline_gates.as_ref(), 100_000)?,
    };

    let sim = raw.simulate.unwrap_or_default();
    let c = Ctx { section: "simulate." };
    let simulate = SimulateSettings {
        n_gates: c.count("n_gates", sim.n_gates.as_ref(), 100_000_000)?,
        events: sim.events.unwrap_or(true),
    };

    let ds = raw.delay_scan.unwrap_or_default();
    let c = Ctx { section: "delay_scan." };
    let delay_scan = DelayScanSettings {
        span: c.qty("span", ds.span.as_ref(), Unit::Second, 400e-12)?,
        step: c.qty("step", ds.step.as_ref(), Unit::Second, 25e-12)?,
        n_gates: c.count("n_gates", ds.n_gates.as_ref(), 10_000_000)?,
    };

    let es = raw.efficiency_sweep.unwrap_or_default();
    let c = Ctx { section: "efficiency_sweep." };
    let values = match &es.values {
        None => vec![0.05, 0.07, 0.093, 0.12, 0.15, 0.2],
        Some(v) => v.iter().map(|x| c.num("values", Some(x), 0.0)).collect::<Result<_, _>>()?,
    };
    let efficiency = EfficiencySettings { values, n_gates: c.count("n_gates", es.n_gates.as_ref(), 100_000_000)? };

    let ms = raw.mu_sweep.unwrap_or_default();
    let c = Ctx { section: "mu_sweep." };
    let per_decade = c.count("per_decade", ms.per_decade.as_ref(), 4)?;
    let mu_sweep = MuSettings {
        min: c.num("min", ms.min.as_ref(), 0.01)?,
        max: c.num("max", ms.max.as_ref(), 1000.0)?,
        per_decade: u32::try_from(per_decade).map_err(|_| c.bad("per_decade", "too large"))?,
        n_gates: c.count("n_gates", ms.n_gates.as_ref(), 100_000_000)?,
        continuous_mu: c.num("continuous_mu", ms.continuous_mu.as_ref(), 1e6)?,
        continuous_gates: c.count("continuous_gates", ms.continuous_gates.as_ref(), 10_000_000)?,
    };

    let cal = raw.calibration.unwrap_or_default();
    let c = Ctx { section: "calibration." };
    let dcal = CalibrationSpec::new(Scenario::operating_point(), 0.034);
    let max_iterations = c.count("max_iterations", cal.max_iterations.as_ref(), dcal.max_iterations as u64)?;
    let calibration = CalibrationSettings {
        target_p_ap: c.num("target_p_ap", cal.target_p_ap.as_ref(), dcal.target_p_ap)?,
        n_gates: c.count("n_gates", cal.n_gates.as_ref(), dcal.n_gates)?,
        tolerance: c.num("tolerance", cal.tolerance.as_ref(), dcal.tolerance)?,
        max_iterations: u32::try_from(max_iterations).map_err(|_| c.bad("max_iterations", "too large"))?,
    };

    let ch = raw.checks.unwrap_or_default();
    let c = Ctx { section: "checks." };
    let checks = CheckSettings {
        n_sigma: c.num("n_sigma", ch.n_sigma.as_ref(), 3.0)?,
        p_ap_range: ch.p_ap_range.as_deref().map(|v| c.pair("p_ap_range", v)).transpose()?,
        p_ap_ns_range: ch.p_ap_ns_range.as_deref().map(|v| c.pair("p_ap_ns_range", v)).transpose()?,
    };

    Ok(RunConfig {
        seed: raw.seed.unwrap_or(0),
        output_dir: raw.output_dir.map(PathBuf::from),
        gate,
        source,
        detector,
        chain,
        waveform_run,
        simulate,
        delay_scan,
        efficiency,
        mu_sweep,
        calibration,
        checks,
    })
}

fn invariant(cond: bool, name: &'static str) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Core(rapidgate_core::Error::Invalid { invariant: name }))
    }
}

impl RunConfig {
    /// Checks every module invariant.
    pub fn validate(&self) -> Result<(), CliError> {
        self.scenario().validate()?;
        if self.source.mu > 0.0 {
            self.source.validate(&self.gate)?;
        }
        self.chain.validate()?;
        invariant(self.waveform_run.n_periods >= 1, "waveform.n_periods >= 1")?;
        invariant(self.simulate.n_gates >= 1, "simulate.n_gates >= 1")?;
        let d = &self.delay_scan;
        invariant(d.step > 0.0 && d.span > 0.0, "delay_scan span and step > 0")?;
        invariant(d.span < 0.5 * self.gate.period(), "delay_scan.span < 1/(2 f_g)")?;
        invariant(d.n_gates >= 1, "delay_scan.n_gates >= 1")?;
        let e = &self.efficiency;
        invariant(!e.values.is_empty(), "efficiency_sweep.values non-empty")?;
        invariant(e.values.iter().all(|v| (0.0..=1.0).contains(v)), "0 <= efficiency_sweep.values <= 1")?;
        invariant(e.n_gates >= 1, "efficiency_sweep.n_gates >= 1")?;
        let m = &self.mu_sweep;
        invariant(m.min > 0.0 && m.max > m.min, "0 < mu_sweep.min < mu_sweep.max")?;
        invariant(m.per_decade >= 1, "mu_sweep.per_decade >= 1")?;
        invariant(m.n_gates >= 1 && m.continuous_gates >= 1, "mu_sweep gate counts >= 1")?;
        invariant(m.continuous_mu > 0.0 && m.continuous_mu.is_finite(), "mu_sweep.continuous_mu > 0")?;
        let c = &self.calibration;
        invariant(c.target_p_ap > 0.0 && c.target_p_ap < 1.0, "0 < calibration.target_p_ap < 1")?;
        invariant(c.tolerance > 0.0, "calibration.tolerance > 0")?;
        invariant(c.n_gates >= 1 && c.max_iterations >= 1, "calibration counts >= 1")?;
        invariant(self.checks.n_sigma > 0.0, "checks.n_sigma > 0")?;
        for r in [self.checks.p_ap_range, self.checks.p_ap_ns_range].into_iter().flatten() {
            invariant(r[0] <= r[1], "check ranges are [low, high]")?;
        }
        Ok(())
    }

    /// Engine scenario; the source is dropped when `mu <= 0`.
    pub fn scenario(&self) -> Scenario {
        Scenario { gate: self.gate, source: (self.source.mu > 0.0).then_some(self.source), detector: self.detector }
    }

    /// Resolved configuration as TOML, every default written out.
    pub fn echo(&self) -> String {
        let q = |v: f64, u: Unit| Some(Scalar::Text(units::format(v, u)));
        let f = |v: f64| Some(Scalar::Float(v));
        let i = |v: u64| Some(Scalar::Int(v as i64));
        let w = &self.chain.waveform;
        let raw = RawConfig {
            seed: Some(self.seed),
            output_dir: self.output_dir.as_ref().map(|p| p.display().to_string()),
            gate: Some(RawGate {
                f_g: q(self.gate.f_g, Unit::Hertz),
                delta_t: q(self.gate.delta_t, Unit::Second),
                profile: Some(self.gate.profile.name().to_string()),
                count_off: q(self.gate.count_off, Unit::Second),
            }),
            source: Some(RawSource {
                mu: f(self.source.mu),
                divider: i(self.source.divider as u64),
                delay: q(self.source.delay, Unit::Second),
                pulse_width: q(self.source.pulse_width, Unit::Second),
                convolve_pulse: Some(self.source.convolve_pulse),
            }),
            detector: Some(RawDetector {
                eta: f(self.detector.eta),
                p_dc_ns: f(self.detector.p_dc_ns),
                afterpulse: Some(RawAfterpulse {
                    mean_traps_per_avalanche: f(self.detector.afterpulse.mean_traps_per_avalanche),
                    detrap_lifetime: q(self.detector.afterpulse.detrap_lifetime, Unit::Second),
                    trigger_prob: f(self.detector.afterpulse.trigger_prob),
                }),
            }),
            waveform: Some(RawWaveform {
                sample_rate: q(w.sample_rate, Unit::Hertz),
                v_pp: q(w.v_pp, Unit::Volt),
                v_dc: q(w.v_dc, Unit::Volt),
                feedthrough_gain: f(w.feedthrough_gain),
                a2: f(w.a2),
                a4: f(w.a4),
                avalanche_amp: q(w.avalanche_amp, Unit::Volt),
                avalanche_rise: q(w.avalanche_rise, Unit::Second),
                amp2_gain_db: f(w.amp2_gain_db),
                noise_rms: q(w.noise_rms, Unit::Volt),
                threshold: q(self.chain.threshold, Unit::Volt),
                warmup_periods: i(self.chain.warmup_periods as u64),
                window: Some(vec![Scalar::Float(self.chain.window.0), Scalar::Float(self.chain.window.1)]),
                noise_seed: Some(self.chain.noise_seed),
                n_periods: i(self.waveform_run.n_periods as u64),
                pipeline_gates: i(self.waveform_run.pipeline_gates),
                sd: Some(RawSd {
                    delay: q(self.chain.sd.delay, Unit::Second),
                    amplitude_mismatch: f(self.chain.sd.amplitude_mismatch),
                    skew: q(self.chain.sd.skew, Unit::Second),
                }),
                notch: Some(
                    self.chain
                        .notches
                        .iter()
                        .map(|n| RawNotch {
                            center: q(n.center, Unit::Hertz),
                            attenuation_db: f(n.attenuation_db),
                            q: f(n.q),
                        })
                        .collect(),
                ),
            }),
            simulate: Some(RawSimulate { n_gates: i(self.simulate.n_gates), events: Some(self.simulate.events) }),
            delay_scan: Some(RawDelayScan {
                span: q(self.delay_scan.span, Unit::Second),
                step: q(self.delay_scan.step, Unit::Second),
                n_gates: i(self.delay_scan.n_gates),
            }),
            efficiency_sweep: Some(RawEfficiency {
                values: Some(self.efficiency.values.iter().map(|v| Scalar::Float(*v)).collect()),
                n_gates: i(self.efficiency.n_gates),
            }),
            mu_sweep: Some(RawMu {
                min: f(self.mu_sweep.min),
                max: f(self.mu_sweep.max),
                per_decade: i(self.mu_sweep.per_decade as u64),
                n_gates: i(self.mu_sweep.n_gates),
                continuous_mu: f(self.mu_sweep.continuous_mu),
                continuous_gates: i(self.mu_sweep.continuous_gates),
            }),
            calibration: Some(RawCalibration {
                target_p_ap: f(self.calibration.target_p_ap),
                n_gates: i(self.calibration.n_gates),
                tolerance: f(self.calibration.tolerance),
                max_iterations: i(self.calibration.max_iterations as u64),
            }),
            checks: Some(RawChecks {
                n_sigma: f(self.checks.n_sigma),
                p_ap_range: self.checks.p_ap_range.map(|r| r.iter().map(|v| Scalar::Float(*v)).collect()),
                p_ap_ns_range: self.checks.p_ap_ns_range.map(|r| r.iter().map(|v| Scalar::Float(*v)).collect()),
            }),
        };
        toml::to_string(&raw).expect("configuration serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[gate]\nf_g = \"921 MHz\"\ndelta_t = \"154 ps\"\n[detector]\neta = 0.093\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.gate, GateConfig::operating_point());
        assert_eq!(cfg.source, PhotonSource::default());
        assert_eq!(cfg.detector, DetectorTruth::operating_point());
        assert_eq!(cfg.chain, ChainConfig::for_gate(&cfg.gate));
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn echo_is_a_fixed_point() {
        let cfg = parse_config(MINIMAL).unwrap();
        let text = cfg.echo();
        let again = parse_config(&text).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(text, again.echo());
    }

    #[test]
    fn non_round_values_survive_echo() {
        let text = "seed = 7\n[gate]\nf_g = 1.2345678901e9\ndelta_t = \"123.456789 ps\"\n[detector]\neta = 0.1234567\n[checks]\np_ap_range = [0.029, 0.039]\n";
        let cfg = parse_config(text).unwrap();
        let again = parse_config(&cfg.echo()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.checks.p_ap_range, Some([0.029, 0.039]));
    }

    #[test]
    fn wide_gate_names_invariant() {
        let err = parse_config("[gate]\nf_g = \"1 GHz\"\ndelta_t = \"1 ns\"\n[detector]\neta = 0.1\n").unwrap_err();
        assert!(err.to_string().contains("delta_t < 1/f_g"), "{err}");
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_config("[gate]\nf_g = \"921 MHz\"\ndelta_t = = 3\n").unwrap_err();
        match err {
            CliError::Syntax { line, column, .. } => {
                assert_eq!(line, 3);
                assert!(column > 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let err = parse_config(&format!("{MINIMAL}bogus = 1\n")).unwrap_err();
        assert!(matches!(err, CliError::Syntax { .. }), "{err:?}");
        let err = parse_config("[gate]\nf_g = \"921 MHz\"\ndelta_t = \"154 ps\"\nwidth = 3\n[detector]\neta = 0.1\n")
            .unwrap_err();
        assert!(err.to_string().contains("width"), "{err}");
    }

    #[test]
    fn missing_required_key() {
        let err = parse_config("[gate]\nf_g = \"921 MHz\"\n[detector]\neta = 0.1\n").unwrap_err();
        assert!(err.to_string().contains("gate.delta_t"), "{err}");
    }

    #[test]
    fn bad_unit_rejected() {
        let err = parse_config("[gate]\nf_g = \"921 Mhz\"\ndelta_t = \"154 ps\"\n[detector]\neta = 0.1\n").unwrap_err();
        assert!(err.to_string().contains("gate.f_g"), "{err}");
    }

    #[test]
    fn zero_mu_means_no_source() {
        let cfg = parse_config(&format!("{MINIMAL}[source]\nmu = 0\n")).unwrap();
        assert!(cfg.scenario().source.is_none());
        let cfg = parse_config(&format!("{MINIMAL}[source]\nmu = -1.0\n")).unwrap();
        assert!(cfg.scenario().source.is_none());
        assert_eq!(parse_config(&cfg.echo()).unwrap(), cfg);
    }
}
