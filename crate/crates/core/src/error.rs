use thiserror::Error;

/// Errors produced by the simulation and measurement routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("time grids do not match")]
    GridMismatch,

    #[error("count mismatch: {left} vs {right}")]
    CountMismatch { left: usize, right: usize },

    #[error("transport problem has {atoms} atoms, budget is {budget}")]
    AtomBudget { atoms: usize, budget: usize },

    #[error("state blew up at step {step} for player {player}")]
    BlowUp { step: usize, player: usize },

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Error {
    Error::Invalid {
        what,
        reason: reason.into(),
    }
}
