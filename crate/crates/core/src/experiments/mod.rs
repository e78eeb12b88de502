//! Sweep drivers composing the engine, the estimators and the waveform chain.
//!
//! Every simulation is described by a [`SimJob`] with its own derived seed.
//! Jobs are independent, so a [`JobRunner`] may execute them in any order or
//! concurrently; results always come back in job order.

mod calibrate;
mod fit;
mod pipeline;
mod sweeps;
mod table1;

pub use calibrate::{calibrate_afterpulse, Calibration, CalibrationSpec};
pub use fit::{fit_gaussian, fwhm_estimate, half_max_width, GaussianFit};
pub use pipeline::{compare_pipeline, PipelineComparison};
pub use sweeps::{
    continuous_illumination, delay_jobs, delay_values, efficiency_jobs, log_values, mu_jobs, run_delay_scan,
    run_efficiency_sweep, run_mu_sweep, EfficiencyPoint, EfficiencySweep, MuSweep,
};
pub use table1::{reproduce_table1, Table1Comparison, Table1Expect, Table1Row, TABLE1_CSV};

use alloc::vec::Vec;

use crate::error::{ensure, Result};
use crate::rng::derive_seed;
use crate::spad::{simulate_summary, CountSummary, DetectorTruth, GateConfig, PhotonSource};

/// Gating, illumination and device truth for one simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub gate: GateConfig,
    pub source: Option<PhotonSource>,
    pub detector: DetectorTruth,
}

impl Scenario {
    /// 921 MHz gating, mu = 0.1 every 12th gate, eta 9.3 %, 2.8e-6 dark
    /// counts per ns, calibrated traps.
    pub fn operating_point() -> Self {
        Self {
            gate: GateConfig::operating_point(),
            source: Some(PhotonSource::default()),
            detector: DetectorTruth::operating_point(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.gate.validate()?;
        if let Some(s) = &self.source {
            s.validate(&self.gate)?;
        }
        self.detector.validate()
    }

    /// Same scenario with the laser blocked.
    pub fn dark(&self) -> Self {
        Self { source: None, ..*self }
    }
}

/// Seed stream of a job within a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lane {
    Illuminated,
    Dark,
}

impl Lane {
    pub fn index(self) -> u64 {
        match self {
            Lane::Illuminated => 0,
            Lane::Dark => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Lane::Illuminated => "illuminated",
            Lane::Dark => "dark",
        }
    }
}

/// One independent engine run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimJob {
    /// Index of the sweep point this job belongs to.
    pub point: usize,
    pub lane: Lane,
    pub scenario: Scenario,
    pub n_gates: u64,
    pub seed: u64,
}

impl SimJob {
    pub fn new(master_seed: u64, point: usize, lane: Lane, scenario: Scenario, n_gates: u64) -> Self {
        Self { point, lane, scenario, n_gates, seed: derive_seed(master_seed, lane.index(), point as u64) }
    }

    pub fn run(&self) -> Result<CountSummary> {
        let s = &self.scenario;
        simulate_summary(&s.gate, s.source.as_ref(), &s.detector, self.n_gates, self.seed)
    }
}

/// Executes batches of independent jobs.
pub trait JobRunner {
    /// Runs every job and returns the summaries in job order.
    fn run_jobs(&self, jobs: &[SimJob]) -> Result<Vec<CountSummary>>;
}

/// Runs jobs one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl JobRunner for Sequential {
    fn run_jobs(&self, jobs: &[SimJob]) -> Result<Vec<CountSummary>> {
        jobs.iter().map(SimJob::run).collect()
    }
}

/// Swept quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    /// Laser delay relative to the gate peak, seconds.
    Delay,
    /// Ground-truth peak efficiency.
    EtaTrue,
    /// Mean photon number per pulse.
    Mu,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::Delay => "delay",
            SweepVariable::EtaTrue => "eta_true",
            SweepVariable::Mu => "mu",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "delay" => Some(SweepVariable::Delay),
            "eta_true" => Some(SweepVariable::EtaTrue),
            "mu" => Some(SweepVariable::Mu),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub base: Scenario,
    pub n_gates: u64,
    pub master_seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        ensure(!self.values.is_empty(), "sweep values non-empty")?;
        ensure(self.values.iter().all(|v| v.is_finite()), "sweep values finite")?;
        ensure(self.n_gates >= 1, "n_gates >= 1")?;
        self.base.validate()
    }

    fn expect(&self, variable: SweepVariable) -> Result<()> {
        ensure(self.variable == variable, "sweep variable matches the experiment")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
    /// One standard deviation, from counting statistics.
    pub y_err: f64,
    /// Set when the estimate behind `y` is negative or could not be formed.
    pub flagged: bool,
}

impl CurvePoint {
    pub fn new(x: f64, y: f64, y_err: f64) -> Self {
        Self { x, y, y_err, flagged: false }
    }
}

/// Points of one curve plus fit results where they apply.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveResult {
    pub x_name: &'static str,
    pub y_name: &'static str,
    pub points: Vec<CurvePoint>,
    pub fit: Option<core::result::Result<GaussianFit, crate::Error>>,
    /// Model-free width above half maximum, when the curve has one peak.
    pub half_max_width: Option<f64>,
}

impl CurveResult {
    pub fn new(x_name: &'static str, y_name: &'static str, points: Vec<CurvePoint>) -> Self {
        Self { x_name, y_name, points, fit: None, half_max_width: None }
    }

    /// Fitted FWHM, if a fit was attempted and succeeded.
    pub fn fwhm(&self) -> Option<f64> {
        match &self.fit {
            Some(Ok(f)) => Some(f.fwhm),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn job_seeds_are_distinct_per_lane_and_point() {
        let s = Scenario::operating_point();
        let a = SimJob::new(7, 0, Lane::Illuminated, s, 10);
        let b = SimJob::new(7, 0, Lane::Dark, s, 10);
        let c = SimJob::new(7, 1, Lane::Illuminated, s, 10);
        assert_ne!(a.seed, b.seed);
        assert_ne!(a.seed, c.seed);
        assert_eq!(a.seed, SimJob::new(7, 0, Lane::Illuminated, s, 99).seed);
    }

    #[test]
    fn spec_rejects_empty_and_non_finite() {
        let mut spec = SweepSpec {
            variable: SweepVariable::Mu,
            values: Vec::new(),
            base: Scenario::operating_point(),
            n_gates: 10,
            master_seed: 0,
        };
        assert!(spec.validate().is_err());
        spec.values = alloc::vec![1.0, f64::NAN];
        assert!(spec.validate().is_err());
        spec.values = alloc::vec![1.0];
        assert!(spec.validate().is_ok());
    }
}
