use alloc::vec::Vec;

use super::{JobRunner, Lane, Scenario, SimJob};
use crate::error::{ensure, Error, Result};
use crate::estimators::afterpulse_prob;

/// Search for the trap population that reproduces a target afterpulse
/// probability at a given operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSpec {
    /// Operating point; its trap lifetime and trigger probability are kept,
    /// its mean trap count is the starting guess.
    pub base: Scenario,
    pub target_p_ap: f64,
    pub n_gates: u64,
    pub master_seed: u64,
    /// Accepted absolute deviation of the estimated afterpulse probability.
    pub tolerance: f64,
    pub max_iterations: u32,
}

impl CalibrationSpec {
    pub fn new(base: Scenario, target_p_ap: f64) -> Self {
        Self { base, target_p_ap, n_gates: 2_000_000_000, master_seed: 0, tolerance: 5e-5, max_iterations: 16 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub mean_traps: f64,
    pub achieved_p_ap: f64,
    pub converged: bool,
    /// `(mean_traps, estimated p_ap)` for every evaluation.
    pub history: Vec<(f64, f64)>,
}

/// Secant search on the mean trap count with common random numbers: the
/// illuminated and dark runs reuse the same seeds at every step.
pub fn calibrate_afterpulse(spec: &CalibrationSpec, runner: &dyn JobRunner) -> Result<Calibration> {
    spec.base.validate()?;
    let source = spec.base.source.ok_or(Error::Invalid { invariant: "calibration needs a photon source" })?;
    ensure(spec.target_p_ap > 0.0 && spec.target_p_ap < 1.0, "0 < target_p_ap < 1")?;
    ensure(spec.tolerance > 0.0, "tolerance > 0")?;
    ensure(spec.max_iterations >= 1, "max_iterations >= 1")?;
    ensure(spec.base.detector.afterpulse.trigger_prob > 0.0, "trigger_prob > 0")?;

    let dark_job = SimJob::new(spec.master_seed, 0, Lane::Dark, spec.base.dark(), spec.n_gates);
    let r_dc = runner.run_jobs(&[dark_job])?[0].rate();

    let evaluate = |m: f64| -> Result<f64> {
        let mut s = spec.base;
        s.detector.afterpulse.mean_traps_per_avalanche = m;
        let job = SimJob::new(spec.master_seed, 0, Lane::Illuminated, s, spec.n_gates);
        let ill = &runner.run_jobs(&[job])?[0];
        afterpulse_prob(ill.rate(), ill.coincidence_rate(), r_dc, source.divider)
    };

    let start = spec.base.detector.afterpulse.mean_traps_per_avalanche;
    let mut m = if start > 0.0 { start } else { 0.5 };
    let mut history = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for _ in 0..spec.max_iterations {
        let p = evaluate(m)?;
        history.push((m, p));
        if (p - spec.target_p_ap).abs() <= spec.tolerance {
            return Ok(Calibration { mean_traps: m, achieved_p_ap: p, converged: true, history });
        }
        let next = match prev {
            Some((m0, p0)) if (p - p0).abs() > 1e-12 && (m - m0).abs() > 1e-12 => {
                m + (spec.target_p_ap - p) * (m - m0) / (p - p0)
            }
            _ if p > 0.0 => m * spec.target_p_ap / p,
            _ => 2.0 * m,
        };
        prev = Some((m, p));
        m = next.clamp(m / 4.0, (4.0 * m).min(100.0));
    }
    let &(m, p) = history
        .iter()
        .min_by(|a, b| (a.1 - spec.target_p_ap).abs().total_cmp(&(b.1 - spec.target_p_ap).abs()))
        .ok_or(Error::FitFailed("no calibration step"))?;
    Ok(Calibration { mean_traps: m, achieved_p_ap: p, converged: false, history })
}
