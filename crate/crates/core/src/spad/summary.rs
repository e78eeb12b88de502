use super::event::{Cause, EventRecord};
use crate::error::{Error, Result};

/// Per-cause tally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CauseTally {
    pub photon: u64,
    pub dark: u64,
    pub afterpulse: u64,
}

impl CauseTally {
    #[inline]
    pub fn add(&mut self, cause: Cause) {
        match cause {
            Cause::Photon => self.photon += 1,
            Cause::Dark => self.dark += 1,
            Cause::Afterpulse => self.afterpulse += 1,
        }
    }

    pub fn get(&self, cause: Cause) -> u64 {
        match cause {
            Cause::Photon => self.photon,
            Cause::Dark => self.dark,
            Cause::Afterpulse => self.afterpulse,
        }
    }

    pub fn total(&self) -> u64 {
        self.photon + self.dark + self.afterpulse
    }

    fn merged(self, o: Self) -> Self {
        Self { photon: self.photon + o.photon, dark: self.dark + o.dark, afterpulse: self.afterpulse + o.afterpulse }
    }
}

/// Accumulated counts of one or more runs with the same gating.
///
/// Rates are counted events divided by the wall duration `n_gates / f_g`.
/// For a dark run (no source) [`rate`](Self::rate) is the dark count rate
/// `R_dc`; for an illuminated run it is the detection rate `R_de` and
/// [`coincidence_rate`](Self::coincidence_rate) is `R_de^c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountSummary {
    pub f_g: f64,
    /// Laser divider, `None` for an unilluminated run.
    pub divider: Option<u32>,
    pub n_gates: u64,
    pub illuminated_gates: u64,
    /// Counted avalanches.
    pub counted: u64,
    /// Counted avalanches in illuminated gates.
    pub counted_coincident: u64,
    /// All avalanches by cause, counted or not.
    pub avalanches: CauseTally,
    /// Counted avalanches by cause.
    pub counted_by_cause: CauseTally,
}

impl CountSummary {
    pub fn empty(f_g: f64, divider: Option<u32>) -> Self {
        Self {
            f_g,
            divider,
            n_gates: 0,
            illuminated_gates: 0,
            counted: 0,
            counted_coincident: 0,
            avalanches: CauseTally::default(),
            counted_by_cause: CauseTally::default(),
        }
    }

    pub(crate) fn record(&mut self, e: &EventRecord) {
        self.avalanches.add(e.cause);
        if e.counted {
            self.counted += 1;
            self.counted_by_cause.add(e.cause);
            if e.illuminated {
                self.counted_coincident += 1;
            }
        }
    }

    /// Wall duration, seconds.
    pub fn duration(&self) -> f64 {
        self.n_gates as f64 / self.f_g
    }

    /// Counted events per second (`R_dc` or `R_de`).
    pub fn rate(&self) -> f64 {
        self.counted as f64 / self.duration()
    }

    /// Counted events in illuminated gates per second (`R_de^c`).
    pub fn coincidence_rate(&self) -> f64 {
        self.counted_coincident as f64 / self.duration()
    }

    /// Poisson standard error of [`rate`](Self::rate).
    pub fn rate_err(&self) -> f64 {
        libm::sqrt(self.counted as f64) / self.duration()
    }

    pub fn coincidence_rate_err(&self) -> f64 {
        libm::sqrt(self.counted_coincident as f64) / self.duration()
    }

    /// Laser repetition rate, if illuminated.
    pub fn f_p(&self) -> Option<f64> {
        self.divider.map(|k| self.f_g / k as f64)
    }

    /// Combines two independent runs. Associative and commutative.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.f_g != other.f_g {
            return Err(Error::Incompatible("gate frequencies differ"));
        }
        if self.divider != other.divider {
            return Err(Error::Incompatible("laser dividers differ"));
        }
        Ok(Self {
            f_g: self.f_g,
            divider: self.divider,
            n_gates: self.n_gates + other.n_gates,
            illuminated_gates: self.illuminated_gates + other.illuminated_gates,
            counted: self.counted + other.counted,
            counted_coincident: self.counted_coincident + other.counted_coincident,
            avalanches: self.avalanches.merged(other.avalanches),
            counted_by_cause: self.counted_by_cause.merged(other.counted_by_cause),
        })
    }

    /// Flat key/value view in a fixed order.
    pub fn fields(&self) -> [(&'static str, f64); 16] {
        [
            ("f_g_hz", self.f_g),
            ("divider", self.divider.map_or(0.0, |k| k as f64)),
            ("n_gates", self.n_gates as f64),
            ("illuminated_gates", self.illuminated_gates as f64),
            ("duration_s", self.duration()),
            ("counted", self.counted as f64),
            ("counted_coincident", self.counted_coincident as f64),
            ("rate_hz", self.rate()),
            ("coincidence_rate_hz", self.coincidence_rate()),
            ("avalanches_photon", self.avalanches.photon as f64),
            ("avalanches_dark", self.avalanches.dark as f64),
            ("avalanches_afterpulse", self.avalanches.afterpulse as f64),
            ("counted_photon", self.counted_by_cause.photon as f64),
            ("counted_dark", self.counted_by_cause.dark as f64),
            ("counted_afterpulse", self.counted_by_cause.afterpulse as f64),
            ("avalanches_total", self.avalanches.total() as f64),
        ]
    }
}
