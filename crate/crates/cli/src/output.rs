//! Output directory with checksummed artifacts.
//!
//! CSV schemas:
//!
//! | file | columns |
//! |------|---------|
//! | `events.csv` | `gate_index,time_ns,cause,counted,illuminated` |
//! | curve files | `x,y,y_err` (SI units, see the curve's `.kv` sidecar or README) |
//! | waveform traces | `time_ns,volts` |
//! | `table1.csv` | `label,p_ap_ns,p_ap_ns_published,deviation,p_dc_gate,duty_cycle,consistent,expect,pass` |

use std::fs;
use std::path::{Path, PathBuf};

use rapidgate_core::experiments::CurvePoint;
use rapidgate_core::spad::EventRecord;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

/// Files written by one run. Names are plain file names, so nothing lands
/// outside `root`.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    artifacts: Vec<Artifact>,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self, CliError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
        Ok(Self { root, artifacts: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn artifacts(&self) -> &[Artifact] {
        &self.artifacts
    }

    pub fn write(&mut self, name: &str, data: &[u8]) -> Result<(), CliError> {
        let plain = !name.is_empty() && !name.contains(['/', '\\']) && name != "." && name != "..";
        if !plain {
            return Err(CliError::Usage(format!("refusing to write {name:?} outside the output directory")));
        }
        let path = self.root.join(name);
        fs::write(&path, data).map_err(|e| CliError::io(&path, e))?;
        self.artifacts.retain(|a| a.file != name);
        self.artifacts.push(Artifact { file: name.to_string(), sha256: sha256_hex(data), bytes: data.len() as u64 });
        Ok(())
    }

    pub fn write_csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        let data = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
        self.write(name, &data)
    }

    pub fn write_kv<K: AsRef<str>>(&mut self, name: &str, fields: &[(K, String)]) -> Result<(), CliError> {
        self.write(name, kv_text(fields).as_bytes())
    }

    pub fn write_curve(&mut self, name: &str, points: &[CurvePoint]) -> Result<(), CliError> {
        self.write_csv(name, &["x", "y", "y_err"], points.iter().map(|p| [num(p.x), num(p.y), num(p.y_err)]))
    }

    pub fn write_events(&mut self, name: &str, events: &[EventRecord]) -> Result<(), CliError> {
        self.write_csv(
            name,
            &["gate_index", "time_ns", "cause", "counted", "illuminated"],
            events.iter().map(|e| {
                [
                    e.gate_index.to_string(),
                    num(e.time * 1e9),
                    e.cause.name().to_string(),
                    e.counted.to_string(),
                    e.illuminated.to_string(),
                ]
            }),
        )
    }

    pub fn write_trace(&mut self, name: &str, dt: f64, samples: &[f64]) -> Result<(), CliError> {
        self.write_csv(
            name,
            &["time_ns", "volts"],
            samples.iter().enumerate().map(|(i, v)| [num(i as f64 * dt * 1e9), num(*v)]),
        )
    }
}

/// Shortest decimal text that reads back to the same value.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

/// `key=value` lines.
pub fn kv_text<K: AsRef<str>>(fields: &[(K, String)]) -> String {
    fields.iter().map(|(k, v)| format!("{}={v}\n", k.as_ref())).collect()
}

/// Numeric fields as `key=value` pairs.
pub fn kv_numbers(fields: &[(&str, f64)]) -> Vec<(String, String)> {
    fields.iter().map(|(k, v)| (k.to_string(), num(*v))).collect()
}
