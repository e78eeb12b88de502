//! Gate-level Monte Carlo engine.
//!
//! Each gate opens once per period `1/f_g`. A gate yields at most one
//! avalanche, resolved in the order afterpulse, photon, dark. Every avalanche
//! (counted or not) traps carriers that may be released into later gates.
//! The count-off rule only decides whether an avalanche is counted.

mod config;
mod countoff;
mod engine;
mod event;
mod prob;
mod summary;
mod traps;

pub use config::{AfterpulseModel, DetectorTruth, GateConfig, PhotonSource, Profile};
pub use countoff::{apply_count_off, CountOff};
pub use engine::{simulate_gates, simulate_summary, Engine};
pub use event::{Cause, EventRecord};
pub use prob::{dark_prob_per_gate, gate_profile_efficiency, per_gate_photon_prob, profile_factor};
pub use summary::{CauseTally, CountSummary};
pub use traps::TrapState;
