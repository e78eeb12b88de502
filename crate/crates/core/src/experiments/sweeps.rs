use alloc::vec::Vec;

use super::{
    fit_gaussian, half_max_width, CurvePoint, CurveResult, JobRunner, Lane, Scenario, SimJob, SweepSpec, SweepVariable,
};
use crate::error::{ensure, Error, Result};
use crate::estimators::{characterize, CharacterizationReport};
use crate::rng::derive_seed;
use crate::spad::{simulate_summary, CountSummary, PhotonSource};

/// Symmetric delay grid `-span, -span + step, ..., span`.
pub fn delay_values(span: f64, step: f64) -> Vec<f64> {
    let n = libm::round(span / step) as i64;
    (-n..=n).map(|i| i as f64 * step).collect()
}

/// `per_decade` log-spaced values from `lo` to `hi` inclusive.
pub fn log_values(lo: f64, hi: f64, per_decade: u32) -> Vec<f64> {
    let decades = libm::log10(hi / lo);
    let n = libm::round(decades * per_decade as f64) as i64;
    (0..=n).map(|i| lo * libm::pow(10.0, i as f64 / per_decade as f64)).collect()
}

fn source_of(spec: &SweepSpec) -> Result<PhotonSource> {
    spec.base.source.ok_or(Error::Invalid { invariant: "sweep needs a photon source" })
}

pub fn delay_jobs(spec: &SweepSpec) -> Result<Vec<SimJob>> {
    spec.validate()?;
    spec.expect(SweepVariable::Delay)?;
    let source = source_of(spec)?;
    let (lo, hi) = spec.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    ensure(hi - lo >= 2.0 * spec.base.gate.delta_t, "delay span >= 2 delta_t")?;
    spec.values
        .iter()
        .enumerate()
        .map(|(i, &delay)| {
            let scenario = Scenario { source: Some(PhotonSource { delay, ..source }), ..spec.base };
            scenario.validate()?;
            Ok(SimJob::new(spec.master_seed, i, Lane::Illuminated, scenario, spec.n_gates))
        })
        .collect()
}

/// Coincidence count rate against laser delay, with a gaussian fit of the
/// gate profile. A failed fit is reported in the result, not as an error.
pub fn run_delay_scan(spec: &SweepSpec, runner: &dyn JobRunner) -> Result<CurveResult> {
    let jobs = delay_jobs(spec)?;
    let summaries = runner.run_jobs(&jobs)?;
    let mut order: Vec<usize> = (0..jobs.len()).collect();
    order.sort_by(|&a, &b| spec.values[a].total_cmp(&spec.values[b]));
    let points = order
        .into_iter()
        .map(|i| {
            let s = &summaries[i];
            CurvePoint::new(spec.values[i], s.coincidence_rate(), s.coincidence_rate_err())
        })
        .collect();
    let mut curve = CurveResult::new("delay_s", "coincidence_rate_hz", points);
    curve.fit = Some(fit_gaussian(&curve.points));
    curve.half_max_width = half_max_width(&curve.points).ok();
    Ok(curve)
}

/// Illuminated and dark job per efficiency point. Dark jobs draw from their
/// own seed lane, so they do not depend on the source settings.
pub fn efficiency_jobs(spec: &SweepSpec) -> Result<Vec<SimJob>> {
    spec.validate()?;
    spec.expect(SweepVariable::EtaTrue)?;
    source_of(spec)?;
    let mut jobs = Vec::with_capacity(2 * spec.values.len());
    for (i, &eta) in spec.values.iter().enumerate() {
        let mut scenario = spec.base;
        scenario.detector.eta = eta;
        scenario.validate()?;
        jobs.push(SimJob::new(spec.master_seed, i, Lane::Illuminated, scenario, spec.n_gates));
        jobs.push(SimJob::new(spec.master_seed, i, Lane::Dark, scenario.dark(), spec.n_gates));
    }
    Ok(jobs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyPoint {
    pub eta_true: f64,
    pub illuminated: CountSummary,
    pub dark: CountSummary,
    pub report: core::result::Result<CharacterizationReport, Error>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencySweep {
    pub points: Vec<EfficiencyPoint>,
    /// Dark count probability per ns against estimated efficiency.
    pub dark: CurveResult,
    /// Afterpulse probability per ns against estimated efficiency.
    pub afterpulse: CurveResult,
}

/// Runs illuminated and dark simulations per ground-truth efficiency and
/// applies every estimator. Points whose estimates fail or go negative are
/// flagged rather than aborting the sweep.
pub fn run_efficiency_sweep(spec: &SweepSpec, runner: &dyn JobRunner) -> Result<EfficiencySweep> {
    let jobs = efficiency_jobs(spec)?;
    let source = source_of(spec)?;
    let summaries = runner.run_jobs(&jobs)?;
    let mut points = Vec::with_capacity(spec.values.len());
    let mut dark = Vec::with_capacity(spec.values.len());
    let mut afterpulse = Vec::with_capacity(spec.values.len());
    for (i, &eta_true) in spec.values.iter().enumerate() {
        let ill = summaries[2 * i];
        let drk = summaries[2 * i + 1];
        let report = characterize(&spec.base.gate, &source, &ill, &drk);
        match &report {
            Ok(r) => {
                let flagged = r.eta_negative() || r.p_ap_negative();
                dark.push(CurvePoint { flagged, ..CurvePoint::new(r.eta.value, r.p_dc_ns.value, r.p_dc_ns.err) });
                afterpulse.push(CurvePoint { flagged, ..CurvePoint::new(r.eta.value, r.p_ap_ns.value, r.p_ap_ns.err) });
            }
            Err(_) => {
                let p = CurvePoint { flagged: true, ..CurvePoint::new(eta_true, f64::NAN, f64::NAN) };
                dark.push(p);
                afterpulse.push(p);
            }
        }
        points.push(EfficiencyPoint { eta_true, illuminated: ill, dark: drk, report });
    }
    Ok(EfficiencySweep {
        points,
        dark: CurveResult::new("eta", "p_dc_ns", dark),
        afterpulse: CurveResult::new("eta", "p_ap_ns", afterpulse),
    })
}

pub fn mu_jobs(spec: &SweepSpec) -> Result<Vec<SimJob>> {
    spec.validate()?;
    spec.expect(SweepVariable::Mu)?;
    let source = source_of(spec)?;
    ensure(spec.values.iter().all(|&m| m > 0.0), "mu values > 0")?;
    ensure(spec.values.windows(2).all(|w| w[1] > w[0]), "mu values increasing")?;
    ensure(spec.values[0] <= 0.01 && spec.values[spec.values.len() - 1] >= 1000.0, "mu sweep spans [0.01, 1000]")?;
    Ok(spec
        .values
        .iter()
        .enumerate()
        .map(|(i, &mu)| {
            let scenario = Scenario { source: Some(PhotonSource { mu, ..source }), ..spec.base };
            SimJob::new(spec.master_seed, i, Lane::Illuminated, scenario, spec.n_gates)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuSweep {
    /// Counted coincidence rate against mu.
    pub coincidence: CurveResult,
    /// Counted detection rate (all gates) against mu.
    pub detection: CurveResult,
}

pub fn run_mu_sweep(spec: &SweepSpec, runner: &dyn JobRunner) -> Result<MuSweep> {
    let jobs = mu_jobs(spec)?;
    let summaries = runner.run_jobs(&jobs)?;
    let coincidence = spec
        .values
        .iter()
        .zip(&summaries)
        .map(|(&mu, s)| CurvePoint::new(mu, s.coincidence_rate(), s.coincidence_rate_err()))
        .collect();
    let detection =
        spec.values.iter().zip(&summaries).map(|(&mu, s)| CurvePoint::new(mu, s.rate(), s.rate_err())).collect();
    Ok(MuSweep {
        coincidence: CurveResult::new("mu", "coincidence_rate_hz", coincidence),
        detection: CurveResult::new("mu", "rate_hz", detection),
    })
}

/// Every gate illuminated with mean photon number `mu`.
pub fn continuous_illumination(base: &Scenario, mu: f64, n_gates: u64, master_seed: u64) -> Result<CountSummary> {
    let source = PhotonSource { mu, divider: 1, ..base.source.unwrap_or_default() };
    let s = Scenario { source: Some(source), ..*base };
    s.validate()?;
    simulate_summary(&s.gate, s.source.as_ref(), &s.detector, n_gates, derive_seed(master_seed, 0, 0))
}
