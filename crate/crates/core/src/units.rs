//! Unit conventions: rates in Hz, times in seconds, densities per nanosecond.

/// Seconds per nanosecond.
pub const NS: f64 = 1e-9;
/// Seconds per picosecond.
pub const PS: f64 = 1e-12;

#[inline]
pub fn to_ns(seconds: f64) -> f64 {
    seconds / NS
}
