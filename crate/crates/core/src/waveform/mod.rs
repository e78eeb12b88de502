//! Sample-level model of the detection chain: sine gate, device
//! feedthrough with even harmonics, band-stop notch bank, self-differencing,
//! a fixed-gain amplifier and a per-gate threshold discriminator.
//!
//! Every stage after [`device_response`] is linear, so the response to
//! background plus avalanche is the sum of the two responses.

mod chain;
mod config;
mod notch;
mod spectrum;

pub use chain::{
    amplify, detect_events, device_response, discriminate, gate_windows, measure_rejection, run_chain, self_difference,
    synth_gate_waveform, ChainOutput, Rejection,
};
pub use config::{ChainConfig, NotchSpec, SdConfig, WaveformConfig};
pub use notch::{apply_notch_bank, Biquad};
pub use spectrum::{tone_amplitude, tone_attenuation_db};
