/// Amplitude of the `freq` component of `samples` by projection onto a
/// cosine/sine pair. Exact for a steady tone when the buffer holds an
/// integer number of cycles.
pub fn tone_amplitude(samples: &[f64], freq: f64, sample_rate: f64) -> f64 {
    let w = core::f64::consts::TAU * freq / sample_rate;
    let (mut c, mut s) = (0.0, 0.0);
    for (i, x) in samples.iter().enumerate() {
        let (si, ci) = libm::sincos(w * i as f64);
        c += x * ci;
        s += x * si;
    }
    2.0 * libm::hypot(c, s) / samples.len() as f64
}

/// Attenuation of a tone between two buffers, dB.
pub fn tone_attenuation_db(input: &[f64], output: &[f64], freq: f64, sample_rate: f64) -> f64 {
    20.0 * libm::log10(tone_amplitude(input, freq, sample_rate) / tone_amplitude(output, freq, sample_rate))
}
