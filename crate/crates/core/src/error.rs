use thiserror::Error;

/// Errors raised by the simulation core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A configuration value violates a documented invariant.
    #[error("invariant violated: {invariant}")]
    Invalid { invariant: &'static str },
    /// An estimator was evaluated outside its mathematical domain.
    #[error("{op}: domain error ({reason})")]
    Domain { op: &'static str, reason: &'static str },
    /// Event stream is not time ordered.
    #[error("event {index} is earlier than its predecessor")]
    Unordered { index: usize },
    /// Curve fit did not produce a usable result.
    #[error("fit failed: {0}")]
    FitFailed(&'static str),
    /// Two count summaries from incompatible configurations were merged.
    #[error("cannot merge summaries: {0}")]
    Incompatible(&'static str),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn ensure(cond: bool, invariant: &'static str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Invalid { invariant })
    }
}
