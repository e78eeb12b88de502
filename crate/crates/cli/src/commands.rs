//! Subcommand implementations. Each writes its artifacts into the output
//! directory and returns tolerance checks; the caller writes the manifest.

use rapidgate_core::estimators::{characterize, CharacterizationReport, Estimate};
use rapidgate_core::experiments::{
    calibrate_afterpulse, compare_pipeline, continuous_illumination, delay_jobs, delay_values, efficiency_jobs,
    log_values, mu_jobs, reproduce_table1, run_delay_scan, run_efficiency_sweep, run_mu_sweep, CalibrationSpec,
    CurvePoint, JobRunner, Lane, SimJob, SweepSpec, SweepVariable, Table1Row,
};
use rapidgate_core::spad::{profile_factor, simulate_gates, Profile};
use rapidgate_core::waveform::{measure_rejection, run_chain, Biquad};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::{CheckRecord, SeedRecord};
use crate::output::{kv_numbers, num, OutputDir};
use crate::runner::ParallelRunner;
use crate::svg::{Plot, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    DelayScan,
    SweepEfficiency,
    SweepMu,
    Table1,
    Waveform,
    CalibrateAfterpulse,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Simulate,
        Command::DelayScan,
        Command::SweepEfficiency,
        Command::SweepMu,
        Command::Table1,
        Command::Waveform,
        Command::CalibrateAfterpulse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::DelayScan => "delay-scan",
            Command::SweepEfficiency => "sweep-efficiency",
            Command::SweepMu => "sweep-mu",
            Command::Table1 => "table1",
            Command::Waveform => "waveform",
            Command::CalibrateAfterpulse => "calibrate-afterpulse",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    /// Whether tolerance checks decide the exit status even without
    /// `--check`.
    pub fn always_checked(self) -> bool {
        self == Command::Table1
    }
}

/// State shared by a run.
pub struct Run<'a> {
    pub config: Option<&'a RunConfig>,
    pub seed: u64,
    pub runner: &'a ParallelRunner,
    pub out: OutputDir,
    pub seeds: Vec<SeedRecord>,
    pub checks: Vec<CheckRecord>,
    /// Replacement for the shipped reference table.
    pub table_text: Option<String>,
}

impl Run<'_> {
    fn config(&self) -> Result<&RunConfig, CliError> {
        self.config.ok_or_else(|| CliError::Usage("this command needs --config".to_string()))
    }

    fn check(&mut self, name: &str, pass: bool, detail: String) {
        self.checks.push(CheckRecord { name: name.to_string(), pass, detail });
    }

    fn record_seeds(&mut self, jobs: &[SimJob]) {
        self.seeds.extend(jobs.iter().map(|j| SeedRecord {
            point: j.point,
            lane: j.lane.name().to_string(),
            seed: j.seed,
        }));
    }

    fn check_estimate(&mut self, name: &str, e: &Estimate, truth: f64, n_sigma: f64) {
        let pass = e.within(truth, n_sigma);
        self.check(name, pass, format!("{} +- {} vs {} ({n_sigma} sigma)", num(e.value), num(e.err), num(truth)));
    }

    pub fn execute(&mut self, command: Command) -> Result<(), CliError> {
        match command {
            Command::Simulate => self.simulate(),
            Command::DelayScan => self.delay_scan(),
            Command::SweepEfficiency => self.sweep_efficiency(),
            Command::SweepMu => self.sweep_mu(),
            Command::Table1 => self.table1(),
            Command::Waveform => self.waveform(),
            Command::CalibrateAfterpulse => self.calibrate(),
        }
    }

    fn simulate(&mut self) -> Result<(), CliError> {
        let cfg = self.config()?.clone();
        let scenario = cfg.scenario();
        let n = cfg.simulate.n_gates;
        let mut jobs = Vec::new();
        if scenario.source.is_some() {
            jobs.push(SimJob::new(self.seed, 0, Lane::Illuminated, scenario, n));
        }
        jobs.push(SimJob::new(self.seed, 0, Lane::Dark, scenario.dark(), n));
        self.record_seeds(&jobs);
        let summaries = self.runner.run_jobs(&jobs)?;

        if cfg.simulate.events {
            let job = jobs[0];
            let s = &job.scenario;
            let (events, _) = simulate_gates(&s.gate, s.source.as_ref(), &s.detector, job.n_gates, job.seed)?;
            self.out.write_events("events.csv", &events)?;
        }
        let dark = summaries[summaries.len() - 1];
        self.out.write_kv("summary_dark.kv", &kv_numbers(&dark.fields()))?;
        println!("dark: R_dc = {} Hz over {} gates", num(dark.rate()), dark.n_gates);

        let Some(source) = scenario.source else {
            let p = rapidgate_core::estimators::dark_per_ns(dark.rate(), cfg.gate.f_g, cfg.gate.delta_t);
            let err = dark.rate_err() / (cfg.gate.f_g * cfg.gate.delta_t * 1e9);
            self.check_estimate("p_dc_ns", &Estimate { value: p, err }, cfg.detector.p_dc_ns, cfg.checks.n_sigma);
            return Ok(());
        };
        let ill = summaries[0];
        self.out.write_kv("summary_illuminated.kv", &kv_numbers(&ill.fields()))?;
        let report = characterize(&cfg.gate, &source, &ill, &dark)?;
        self.write_report(&report)?;
        println!(
            "eta = {} +- {}, P_dc^ns = {} ns^-1, P_ap = {} +- {}, P_ap^ns = {} ns^-1",
            num(report.eta.value),
            num(report.eta.err),
            num(report.p_dc_ns.value),
            num(report.p_ap.value),
            num(report.p_ap.err),
            num(report.p_ap_ns.value)
        );

        let n_sigma = cfg.checks.n_sigma;
        let eta_truth = cfg.detector.eta * profile_factor(&cfg.gate, &source);
        self.check_estimate("eta", &report.eta, eta_truth, n_sigma);
        self.check_estimate("p_dc_ns", &report.p_dc_ns, cfg.detector.p_dc_ns, n_sigma);
        if !cfg.detector.afterpulse.is_enabled() {
            self.check_estimate("p_ap_zero", &report.p_ap, 0.0, n_sigma);
        }
        if let Some([lo, hi]) = cfg.checks.p_ap_range {
            let v = report.p_ap.value;
            self.check("p_ap_range", (lo..=hi).contains(&v), format!("{} in [{}, {}]", num(v), num(lo), num(hi)));
        }
        if let Some([lo, hi]) = cfg.checks.p_ap_ns_range {
            let v = report.p_ap_ns.value;
            self.check("p_ap_ns_range", (lo..=hi).contains(&v), format!("{} in [{}, {}]", num(v), num(lo), num(hi)));
        }
        Ok(())
    }

    fn write_report(&mut self, report: &CharacterizationReport) -> Result<(), CliError> {
        let fields = report.fields();
        self.out.write_kv("report.kv", &kv_numbers(&fields))?;
        let header: Vec<&str> = fields.iter().map(|(k, _)| *k).collect();
        self.out.write_csv("report.csv", &header, [fields.iter().map(|(_, v)| num(*v)).collect::<Vec<_>>()])
    }

    fn delay_scan(&mut self) -> Result<(), CliError> {
        let cfg = self.config()?.clone();
        let d = &cfg.delay_scan;
        let spec = SweepSpec {
            variable: SweepVariable::Delay,
            values: delay_values(d.span, d.step),
            base: cfg.scenario(),
            n_gates: d.n_gates,
            master_seed: self.seed,
        };
        self.record_seeds(&delay_jobs(&spec)?);
        let curve = run_delay_scan(&spec, self.runner)?;
        self.out.write_curve("delay_scan.csv", &curve.points)?;

        let mut fields =
            vec![("x".to_string(), "delay_s".to_string()), ("y".to_string(), "coincidence_rate_hz".to_string())];
        match &curve.fit {
            Some(Ok(f)) => {
                fields.extend(kv_numbers(&[
                    ("fwhm_s", f.fwhm),
                    ("center_s", f.center),
                    ("amplitude_hz", f.amplitude),
                    ("offset_hz", f.offset),
                    ("chi2", f.chi2),
                ]));
                fields.push(("fit".to_string(), "ok".to_string()));
            }
            Some(Err(e)) => fields.push(("fit".to_string(), format!("failed: {e}"))),
            None => {}
        }
        if let Some(w) = curve.half_max_width {
            fields.push(("half_max_width_s".to_string(), num(w)));
        }
        self.out.write_kv("delay_scan_fit.kv", &fields)?;

        let mut series = vec![Series {
            name: "simulated",
            points: curve.points.iter().map(|p| (p.x * 1e12, p.y)).collect(),
            markers: true,
        }];
        if let Some(Ok(f)) = &curve.fit {
            let pts = (0..=200)
                .map(|i| {
                    let x = -d.span + 2.0 * d.span * i as f64 / 200.0;
                    (x * 1e12, f.eval(x))
                })
                .collect();
            series.push(Series { name: "gaussian fit", points: pts, markers: false });
        }
        let svg = Plot {
            title: "Count rate against laser delay",
            x_label: "delay (ps)",
            y_label: "coincidence rate (Hz)",
            log_x: false,
            log_y: false,
            series,
        }
        .render();
        self.out.write("delay_scan.svg", svg.as_bytes())?;

        let dt = cfg.gate.delta_t;
        match cfg.gate.profile {
            Profile::Gaussian => {
                let fwhm = curve.fwhm();
                let pass = fwhm.is_some_and(|w| ((w - dt) / dt).abs() <= 0.05);
                let detail = match fwhm {
                    Some(w) => format!("fitted {} s vs {} s (5 %)", num(w), num(dt)),
                    None => "fit failed".to_string(),
                };
                println!("delay scan: {detail}");
                self.check("fwhm", pass, detail);
            }
            Profile::Rectangular => {
                let w = curve.half_max_width;
                let pass = w.is_some_and(|w| (w - dt).abs() <= d.step);
                self.check("plateau_width", pass, format!("{w:?} vs {} s (one step)", num(dt)));
            }
        }
        Ok(())
    }

    fn sweep_efficiency(&mut self) -> Result<(), CliError> {
        let cfg = self.config()?.clone();
        let spec = SweepSpec {
            variable: SweepVariable::EtaTrue,
            values: cfg.efficiency.values.clone(),
            base: cfg.scenario(),
            n_gates: cfg.efficiency.n_gates,
            master_seed: self.seed,
        };
        self.record_seeds(&efficiency_jobs(&spec)?);
        let sweep = run_efficiency_sweep(&spec, self.runner)?;
        self.out.write_curve("dark_curve.csv", &sweep.dark.points)?;
        self.out.write_curve("afterpulse_curve.csv", &sweep.afterpulse.points)?;

        let mut header = vec!["eta_true", "status"];
        let names = CharacterizationReport::field_names();
        header.extend(names.iter());
        let rows = sweep.points.iter().map(|p| {
            let mut row = vec![num(p.eta_true)];
            match &p.report {
                Ok(r) => {
                    let flagged = r.eta_negative() || r.p_ap_negative();
                    row.push(if flagged { "flagged" } else { "ok" }.to_string());
                    row.extend(r.fields().iter().map(|(_, v)| num(*v)));
                }
                Err(e) => {
                    row.push(format!("error: {e}"));
                    row.extend(names.iter().map(|_| String::new()));
                }
            }
            row
        });
        self.out.write_csv("efficiency_points.csv", &header, rows)?;

        for (file, curve, label) in [
            ("dark_curve.svg", &sweep.dark, "dark count probability (ns^-1)"),
            ("afterpulse_curve.svg", &sweep.afterpulse, "afterpulse probability (ns^-1)"),
        ] {
            let svg = Plot {
                title: label,
                x_label: "estimated detection efficiency",
                y_label: label,
                log_x: false,
                log_y: false,
                series: vec![Series { name: "simulated", points: xy(&curve.points), markers: true }],
            }
            .render();
            self.out.write(file, svg.as_bytes())?;
        }

        let n_sigma = cfg.checks.n_sigma;
        let source = spec.base.source.expect("validated by the sweep");
        let pf = profile_factor(&cfg.gate, &source);
        for p in &sweep.points {
            match &p.report {
                Ok(r) => {
                    self.check_estimate(&format!("eta[{}]", num(p.eta_true)), &r.eta, p.eta_true * pf, n_sigma);
                    self.check_estimate(
                        &format!("p_dc_ns[{}]", num(p.eta_true)),
                        &r.p_dc_ns,
                        cfg.detector.p_dc_ns,
                        n_sigma,
                    );
                    if !cfg.detector.afterpulse.is_enabled() {
                        self.check_estimate(&format!("p_ap_zero[{}]", num(p.eta_true)), &r.p_ap, 0.0, n_sigma);
                    }
                }
                Err(e) => self.check(&format!("estimate[{}]", num(p.eta_true)), false, e.to_string()),
            }
        }
        println!("efficiency sweep: {} points", sweep.points.len());
        Ok(())
    }

    fn sweep_mu(&mut self) -> Result<(), CliError> {
        let cfg = self.config()?.clone();
        let m = &cfg.mu_sweep;
        let spec = SweepSpec {
            variable: SweepVariable::Mu,
            values: log_values(m.min, m.max, m.per_decade),
            base: cfg.scenario(),
            n_gates: m.n_gates,
            master_seed: self.seed,
        };
        self.record_seeds(&mu_jobs(&spec)?);
        let sweep = run_mu_sweep(&spec, self.runner)?;
        let continuous = continuous_illumination(&spec.base, m.continuous_mu, m.continuous_gates, self.seed)?;
        self.seeds.push(SeedRecord {
            point: 0,
            lane: "continuous".to_string(),
            seed: rapidgate_core::rng::derive_seed(self.seed, 0, 0),
        });
        self.out.write_curve("mu_coincidence.csv", &sweep.coincidence.points)?;
        self.out.write_curve("mu_detection.csv", &sweep.detection.points)?;
        self.out.write_kv("mu_continuous.kv", &kv_numbers(&continuous.fields()))?;
        let svg = Plot {
            title: "Count rate against mean photon number",
            x_label: "mean photon number per pulse",
            y_label: "count rate (Hz)",
            log_x: true,
            log_y: true,
            series: vec![
                Series { name: "coincidence", points: xy(&sweep.coincidence.points), markers: true },
                Series { name: "all gates", points: xy(&sweep.detection.points), markers: true },
            ],
        }
        .render();
        self.out.write("mu_sweep.svg", svg.as_bytes())?;

        let source = spec.base.source.expect("validated by the sweep");
        let f_p = source.f_p(&cfg.gate);
        let eta = cfg.detector.eta * profile_factor(&cfg.gate, &source);
        let mut worst: f64 = 0.0;
        for p in sweep.coincidence.points.iter().filter(|p| p.x <= 1.0) {
            let linear = f_p * p.x * eta;
            worst = worst.max(((p.y - linear) / linear).abs());
        }
        self.check("linear_below_mu_1", worst <= 0.05, format!("largest deviation {}", num(worst)));
        let last = sweep.coincidence.points.last().expect("non-empty sweep");
        let dev = (last.y - f_p) / f_p;
        let detail = format!("R_de_c {} Hz at mu {} vs f_p {} Hz", num(last.y), num(last.x), num(f_p));
        if cfg.detector.afterpulse.is_enabled() {
            // Afterpulses just before an illuminated gate start a count-off
            // that hides it, so the plateau sits slightly below f_p.
            self.check("saturation", (-0.02..=1e-3).contains(&dev), format!("{detail} (traps on: within -2 %)"));
        } else {
            self.check("saturation", dev.abs() <= 1e-3, format!("{detail} (0.1 %)"));
        }
        let r = continuous.rate();
        self.check("continuous_rate", (85e6..=100e6).contains(&r), format!("{} Hz in [85, 100] MHz", num(r)));
        println!("mu sweep: saturation {} Hz, continuous {} Hz", num(last.y), num(r));
        Ok(())
    }

    fn table1(&mut self) -> Result<(), CliError> {
        let rows = match &self.table_text {
            Some(t) => Table1Row::parse_all(t)?,
            None => Table1Row::published(),
        };
        let out = reproduce_table1(&rows)?;
        self.out.write_csv(
            "table1.csv",
            &[
                "label",
                "p_ap_ns",
                "p_ap_ns_published",
                "deviation",
                "p_dc_gate",
                "duty_cycle",
                "consistent",
                "expect",
                "pass",
            ],
            out.iter().map(|c| {
                [
                    c.row.label.clone(),
                    num(c.p_ap_ns),
                    num(c.row.p_ap_ns_published),
                    num(c.deviation),
                    num(c.p_dc_gate),
                    num(c.duty_cycle),
                    c.consistent.to_string(),
                    match c.row.expect {
                        rapidgate_core::experiments::Table1Expect::Consistent => "consistent",
                        rapidgate_core::experiments::Table1Expect::Inconsistent => "inconsistent",
                    }
                    .to_string(),
                    c.passes().to_string(),
                ]
            }),
        )?;
        for c in &out {
            let verdict =
                if c.consistent { "consistent" } else { "not consistent with the afterpulse density formula" };
            println!(
                "{:<20} P_ap^ns {:.3e} vs {:.3e} ({:+.1} %): {verdict}",
                c.row.label,
                c.p_ap_ns,
                c.row.p_ap_ns_published,
                100.0 * c.deviation
            );
            self.check(
                &format!("table1[{}]", c.row.label),
                c.passes(),
                format!("deviation {} tolerance {}", num(c.deviation), num(c.row.tolerance)),
            );
        }
        Ok(())
    }

    fn waveform(&mut self) -> Result<(), CliError> {
        let cfg = self.config()?.clone();
        let chain = &cfg.chain;
        let rej = measure_rejection(chain)?;
        let warm = chain.warmup_periods;
        let n = cfg.waveform_run.n_periods;
        let period = 1.0 / chain.f_g;
        let background = run_chain(chain, warm + n, &[])?;
        let avalanche_at = (warm + n / 2) as f64 * period;
        let with_avalanche = run_chain(chain, warm + n, &[avalanche_at])?;
        let start = (warm as f64 * chain.samples_per_period()).round() as usize;
        let dt = chain.waveform.dt();
        self.out.write_trace("background.csv", dt, &background.output[start..])?;
        self.out.write_trace("avalanche.csv", dt, &with_avalanche.output[start..])?;
        let to_mv = |v: &[f64]| -> Vec<(f64, f64)> {
            v.iter().enumerate().map(|(i, x)| (i as f64 * dt * 1e9, x * 1e3)).collect()
        };
        let svg = Plot {
            title: "Discriminator input",
            x_label: "time (ns)",
            y_label: "signal (mV)",
            log_x: false,
            log_y: false,
            series: vec![
                Series { name: "background", points: to_mv(&background.output[start..]), markers: false },
                Series { name: "with avalanche", points: to_mv(&with_avalanche.output[start..]), markers: false },
            ],
        }
        .render();
        self.out.write("waveform.svg", svg.as_bytes())?;

        let fs = chain.waveform.sample_rate;
        let bank: Vec<Biquad> = chain.notches.iter().map(|s| Biquad::notch(s, fs)).collect();
        let mut fields = kv_numbers(&[
            ("background_residual_v", rej.background_residual),
            ("avalanche_peak_v", rej.avalanche_peak),
            ("ratio_db", rej.ratio_db),
            ("filtered_background_v", rej.filtered_background),
            ("device_background_v", rej.device_background),
        ]);
        let mut notch_ok = true;
        let mut notch_detail = Vec::new();
        for spec in &chain.notches {
            let gain: f64 = bank.iter().map(|b| b.gain_at(spec.center, fs)).product();
            let att = -20.0 * gain.log10();
            notch_ok &= att >= 30.0 - 1e-9;
            fields.push((format!("notch_attenuation_db@{}", num(spec.center)), num(att)));
            notch_detail.push(format!("{att:.1} dB"));
        }
        println!(
            "waveform: background {:.3} mV, avalanche {:.3} mV, notches {}",
            rej.background_residual * 1e3,
            rej.avalanche_peak * 1e3,
            notch_detail.join(", ")
        );
        self.check(
            "background_below_1mV",
            rej.background_residual < 1e-3,
            format!("{} V", num(rej.background_residual)),
        );
        self.check(
            "avalanche_near_2mV",
            (rej.avalanche_peak - 2e-3).abs() <= 0.5e-3,
            format!("{} V (2 mV +- 25 %)", num(rej.avalanche_peak)),
        );
        self.check("notch_depth", notch_ok, notch_detail.join(", "));

        if cfg.waveform_run.pipeline_gates > 0 {
            let gates = cfg.waveform_run.pipeline_gates;
            let seed = SimJob::new(self.seed, 0, Lane::Illuminated, cfg.scenario(), gates).seed;
            self.seeds.push(SeedRecord { point: 0, lane: "pipeline".to_string(), seed });
            let cmp = compare_pipeline(&cfg.scenario(), chain, gates, self.seed)?;
            fields.push(("pipeline_gates".to_string(), gates.to_string()));
            fields.push(("pipeline_engine_avalanches".to_string(), cmp.engine_gates.len().to_string()));
            fields.push(("pipeline_detections".to_string(), cmp.detected_gates.len().to_string()));
            fields.push(("pipeline_missing".to_string(), cmp.missing().len().to_string()));
            fields.push(("pipeline_spurious".to_string(), cmp.spurious().len().to_string()));
            fields.push(("pipeline_adjacent".to_string(), cmp.adjacent.len().to_string()));
            self.check(
                "pipeline_equivalence",
                cmp.sets_equal(),
                format!(
                    "{} avalanches, {} detections, {} adjacent",
                    cmp.engine_gates.len(),
                    cmp.detected_gates.len(),
                    cmp.adjacent.len()
                ),
            );
        }
        self.out.write_kv("waveform.kv", &fields)
    }

    fn calibrate(&mut self) -> Result<(), CliError> {
        let cfg = self.config()?.clone();
        let c = &cfg.calibration;
        let spec = CalibrationSpec {
            base: cfg.scenario(),
            target_p_ap: c.target_p_ap,
            n_gates: c.n_gates,
            master_seed: self.seed,
            tolerance: c.tolerance,
            max_iterations: c.max_iterations,
        };
        for lane in [Lane::Illuminated, Lane::Dark] {
            let job = SimJob::new(self.seed, 0, lane, spec.base, spec.n_gates);
            self.seeds.push(SeedRecord { point: 0, lane: lane.name().to_string(), seed: job.seed });
        }
        let cal = calibrate_afterpulse(&spec, self.runner)?;
        self.out.write_kv(
            "calibration.kv",
            &[
                ("mean_traps_per_avalanche", num(cal.mean_traps)),
                ("achieved_p_ap", num(cal.achieved_p_ap)),
                ("target_p_ap", num(c.target_p_ap)),
                ("converged", cal.converged.to_string()),
                ("iterations", cal.history.len().to_string()),
            ],
        )?;
        self.out.write_csv(
            "calibration_history.csv",
            &["mean_traps_per_avalanche", "p_ap"],
            cal.history.iter().map(|(m, p)| [num(*m), num(*p)]),
        )?;
        println!(
            "calibration: mean_traps_per_avalanche = {} gives P_ap = {}",
            num(cal.mean_traps),
            num(cal.achieved_p_ap)
        );
        self.check(
            "converged",
            cal.converged,
            format!("|{} - {}| <= {}", num(cal.achieved_p_ap), num(c.target_p_ap), num(c.tolerance)),
        );
        Ok(())
    }
}

fn xy(points: &[CurvePoint]) -> Vec<(f64, f64)> {
    points.iter().map(|p| (p.x, p.y)).collect()
}
