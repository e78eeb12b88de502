//! Simulation and characterization core for rapid sine-gated single-photon
//! avalanche photodiodes.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every numeric piece of
//! the toolkit:
//!
//! - [`spad`]: gate-level Monte Carlo engine (photons, dark counts,
//!   afterpulsing through a trap model, count-off rule).
//! - [`waveform`]: sample-level analog chain (sine gate, device feedthrough,
//!   band-stop notch bank, self-differencing, amplifier, discriminator).
//! - [`estimators`]: closed-form efficiency, dark count and afterpulse
//!   estimators applied to count summaries.
//! - [`experiments`]: sweep drivers (delay scan, efficiency sweep, mean photon
//!   number sweep, reference table comparison, afterpulse calibration).
//!
//! IO, configuration files and the command line live in the `rapidgate`
//! crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
pub mod estimators;
pub mod experiments;
pub mod rng;
pub mod spad;
pub mod units;
pub mod waveform;

pub use error::{Error, Result};
