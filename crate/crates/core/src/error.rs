use std::fmt;

use thiserror::Error;

/// Phase of a micro-macro time step, used to tag propagated errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Micro,
    Restrict,
    Macro,
    Match,
    Extrapolate,
    Remainder,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::Micro => "micro",
            Phase::Restrict => "restrict",
            Phase::Macro => "macro",
            Phase::Match => "match",
            Phase::Extrapolate => "extrapolate",
            Phase::Remainder => "remainder",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters for a mathematical object (e.g. θ ≤ 0 for a basis).
    #[error("domain error: {0}")]
    Domain(String),

    /// A physical state left the admissible set (ρ ≤ 0, θ ≤ 0).
    #[error("invalid state in cell {cell:?}: {reason}")]
    State { cell: Option<usize>, reason: String },

    /// Inconsistent or out-of-range configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("CFL violation in cell {cell}: dt = {dt:.6e} exceeds stable limit {limit:.6e}")]
    Cfl { cell: usize, dt: f64, limit: f64 },

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("{phase} phase failed: {source}")]
    Phase {
        phase: Phase,
        #[source]
        source: Box<Error>,
    },

    #[error("at t = {time:.6e}: {source}")]
    AtTime {
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn state(cell: Option<usize>, reason: impl Into<String>) -> Self {
        Error::State {
            cell,
            reason: reason.into(),
        }
    }

    pub(crate) fn in_phase(self, phase: Phase) -> Self {
        Error::Phase {
            phase,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_time(self, time: f64) -> Self {
        Error::AtTime {
            time,
            source: Box::new(self),
        }
    }

    /// True when the root cause is a configuration problem.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) => true,
            Error::Phase { source, .. } | Error::AtTime { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
