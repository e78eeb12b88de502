/// What triggered an avalanche.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cause {
    Photon,
    Dark,
    Afterpulse,
}

impl Cause {
    pub const ALL: [Cause; 3] = [Cause::Photon, Cause::Dark, Cause::Afterpulse];

    pub fn name(self) -> &'static str {
        match self {
            Cause::Photon => "photon",
            Cause::Dark => "dark",
            Cause::Afterpulse => "afterpulse",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

/// One avalanche.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub gate_index: u64,
    /// Absolute time, seconds from the peak of gate 0.
    pub time: f64,
    pub cause: Cause,
    pub counted: bool,
    pub illuminated: bool,
}
