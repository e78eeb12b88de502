//! Argument parsing and dispatch.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::commands::{Command, Run};
use crate::config::{parse_config, RunConfig};
use crate::error::{CliError, EXIT_CHECK, EXIT_ERROR, EXIT_OK};
use crate::manifest::{verify, Manifest, MANIFEST_FILE};
use crate::output::OutputDir;
use crate::runner::ParallelRunner;

pub const OUT_ENV: &str = "RAPIDGATE_OUT";
const DEFAULT_OUT: &str = "rapidgate-out";

#[derive(Debug, Parser)]
#[command(name = "rapidgate", version, about = "Sine-gated SPAD simulator and characterization toolkit")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    pub jobs: usize,
    /// Output directory [default: config `output_dir`, then $RAPIDGATE_OUT, then ./rapidgate-out].
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Fail with exit status 3 when a tolerance check fails.
    #[arg(long, global = true)]
    pub check: bool,
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Illuminated and dark runs plus every estimator.
    Simulate,
    /// Count rate against laser delay with a gaussian width fit.
    DelayScan,
    /// Dark count and afterpulse densities against efficiency.
    SweepEfficiency,
    /// Count rate against mean photon number, plus continuous illumination.
    SweepMu,
    /// Recompute the published comparison table (always checked).
    Table1 {
        /// Reference table to use instead of the shipped one.
        #[arg(long, value_name = "PATH")]
        table: Option<PathBuf>,
    },
    /// Analog chain traces, rejection levels and engine comparison.
    Waveform,
    /// Fit the trap population to a target afterpulse probability.
    CalibrateAfterpulse,
    /// Print the resolved configuration with every default filled in.
    EchoConfig,
    /// Check output files against a manifest's checksums.
    Verify {
        /// Manifest file or the directory holding it.
        manifest: PathBuf,
    },
    /// Repeat a run from its manifest and compare outputs byte for byte.
    Rerun {
        /// Manifest file or the directory holding it.
        manifest: PathBuf,
    },
}

/// Parses arguments, runs, and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    let config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            Some(parse_config(&text)?)
        }
        None => None,
    };
    let command = match &cli.command {
        Sub::Simulate => Command::Simulate,
        Sub::DelayScan => Command::DelayScan,
        Sub::SweepEfficiency => Command::SweepEfficiency,
        Sub::SweepMu => Command::SweepMu,
        Sub::Table1 { .. } => Command::Table1,
        Sub::Waveform => Command::Waveform,
        Sub::CalibrateAfterpulse => Command::CalibrateAfterpulse,
        Sub::EchoConfig => {
            let cfg = config.ok_or_else(|| CliError::Usage("echo-config needs --config".to_string()))?;
            print!("{}", cfg.echo());
            return Ok(EXIT_OK);
        }
        Sub::Verify { manifest } => return verify_command(manifest),
        Sub::Rerun { manifest } => return rerun_command(cli, manifest),
    };
    if command != Command::Table1 && config.is_none() {
        return Err(CliError::Usage(format!("{} needs --config", command.name())));
    }
    let table_text = match &cli.command {
        Sub::Table1 { table: Some(p) } => Some(fs::read_to_string(p).map_err(|e| CliError::io(p, e))?),
        _ => None,
    };
    let out = resolve_out(cli.out.as_deref(), config.as_ref());
    let seed = cli.seed.or(config.as_ref().map(|c| c.seed)).unwrap_or(0);
    let outcome = execute(command, config.as_ref(), seed, cli.check, cli.jobs, &out, table_text)?;
    Ok(outcome.exit_code)
}

fn resolve_out(flag: Option<&Path>, config: Option<&RunConfig>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = config.and_then(|c| c.output_dir.clone()) {
        return p;
    }
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(DEFAULT_OUT),
    }
}

pub struct Outcome {
    pub manifest: Manifest,
    pub exit_code: i32,
}

/// Runs one command into `out` and writes its manifest, also when the run
/// fails part way.
pub fn execute(
    command: Command,
    config: Option<&RunConfig>,
    seed: u64,
    check: bool,
    jobs: usize,
    out: &Path,
    table_text: Option<String>,
) -> Result<Outcome, CliError> {
    let runner = ParallelRunner::new(jobs);
    let mut run = Run {
        config,
        seed,
        runner: &runner,
        out: OutputDir::create(out)?,
        seeds: Vec::new(),
        checks: Vec::new(),
        table_text,
    };
    let result = run.execute(command);
    let enforced = check || command.always_checked();
    let checks_pass = run.checks.iter().all(|c| c.pass);
    let status = match (&result, checks_pass) {
        (Err(_), _) => "error",
        (Ok(()), true) => "ok",
        (Ok(()), false) => "check-failed",
    };
    let manifest = Manifest {
        tool: "rapidgate".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.name().to_string(),
        master_seed: seed,
        config: config.map(RunConfig::echo),
        check,
        status: status.to_string(),
        seeds: run.seeds,
        checks: run.checks,
        outputs: run.out.artifacts().to_vec(),
    };
    let path = manifest.write(run.out.root())?;
    result?;
    for c in &manifest.checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("manifest: {}", path.display());
    let exit_code = if enforced && !checks_pass { EXIT_CHECK } else { EXIT_OK };
    Ok(Outcome { manifest, exit_code })
}

fn manifest_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(MANIFEST_FILE)
    } else {
        p.to_path_buf()
    }
}

fn verify_command(path: &Path) -> Result<i32, CliError> {
    let path = manifest_path(path);
    let manifest = Manifest::read(&path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let bad = verify(&manifest, dir);
    if bad.is_empty() {
        println!("verified {} files", manifest.outputs.len());
        Ok(EXIT_OK)
    } else {
        for (file, why) in &bad {
            println!("MISMATCH {file}: {why}");
        }
        Ok(EXIT_CHECK)
    }
}

fn rerun_command(cli: &Cli, path: &Path) -> Result<i32, CliError> {
    let path = manifest_path(path);
    let original = Manifest::read(&path)?;
    let command = Command::from_name(&original.command)
        .ok_or_else(|| CliError::Manifest(format!("unknown command {:?}", original.command)))?;
    let config = original.config.as_deref().map(parse_config).transpose()?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let out = cli.out.clone().unwrap_or_else(|| dir.join("rerun"));
    if out.canonicalize().ok() == dir.canonicalize().ok() {
        return Err(CliError::Usage("rerun output must differ from the original directory".to_string()));
    }
    let table_text = None;
    let outcome = execute(command, config.as_ref(), original.master_seed, original.check, cli.jobs, &out, table_text)?;
    let mut differ = 0;
    for a in &original.outputs {
        match outcome.manifest.outputs.iter().find(|b| b.file == a.file) {
            Some(b) if b.sha256 == a.sha256 => {}
            Some(_) => {
                differ += 1;
                println!("DIFFERS {}", a.file);
            }
            None => {
                differ += 1;
                println!("MISSING {}", a.file);
            }
        }
    }
    if differ == 0 {
        println!("rerun reproduced {} files byte for byte", original.outputs.len());
        Ok(outcome.exit_code)
    } else {
        Ok(EXIT_CHECK.max(outcome.exit_code).max(EXIT_ERROR))
    }
}
