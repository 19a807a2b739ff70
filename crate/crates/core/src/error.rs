use thiserror::Error;

/// Input mode of the interferometer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Coherent,
    Squeezed,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Coherent => f.write_str("coherent"),
            Mode::Squeezed => f.write_str("squeezed"),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("index outside the j={j} multiplet: {what}")]
    OutOfMultiplet { j: f64, what: String },

    #[error("{mode} mode needs more than {hard_cap} photons: tail mass {tail_mass:e} exceeds tolerance {tolerance:e}")]
    Truncation {
        mode: Mode,
        hard_cap: usize,
        tail_mass: f64,
        tolerance: f64,
    },

    #[error("allocation of {required} bytes exceeds the configured ceiling of {limit} bytes")]
    MemoryCeiling { required: usize, limit: usize },

    #[error("sector N={total_n} carries no probability weight")]
    EmptySector { total_n: usize },

    #[error("outcome table covers only {kept_mass} of the probability mass (need at least {required})")]
    UndercoveredTable { kept_mass: f64, required: f64 },

    #[error("outcome (n_c={n_c}, n_d={n_d}) has zero likelihood at every grid phase")]
    ImpossibleOutcome { n_c: u32, n_d: u32 },

    #[error("finite-difference estimate did not converge: {what}")]
    NonConvergence { what: String },

    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of a numerical procedure, as opposed to rejected input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonConvergence { .. }
            | Error::Truncation { .. }
            | Error::UndercoveredTable { .. }
            | Error::ImpossibleOutcome { .. }
            | Error::MemoryCeiling { .. } => true,
            Error::Trial { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
