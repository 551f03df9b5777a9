use std::fmt;

use thiserror::Error;

/// A single violated configuration invariant, addressed by its field path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {}", join_violations(.0))]
    Validation(Vec<Violation>),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error(
        "unitarity defect {defect:.3e} exceeds tolerance {tolerance:.1e} after {steps} steps; \
         retry with steps_per_cycle = {retry_steps_per_cycle}"
    )]
    Unitarity { defect: f64, tolerance: f64, steps: u64, retry_steps_per_cycle: usize },

    #[error("external field does not vanish at the propagation endpoints (envelope {0:?})")]
    FieldOnAtEndpoints([f64; 2]),

    #[error(
        "G(-|-) is singular or ill-conditioned (cond ~ {cond:.3e}, cap {cap:.1e}); \
         increase n_cut or reduce the field strength"
    )]
    IllConditioned { cond: f64, cap: f64 },

    #[error(
        "multi-pair enumeration needs {needed} states, budget is {budget}; \
         raise prune_threshold or lower n_sector_max"
    )]
    EnumerationBudget { needed: u128, budget: u128 },

    #[error("Fock oracle limited to {max} single-particle modes, basis has {modes}")]
    OracleTooLarge { modes: usize, max: usize },

    #[error("many-body norm drifted by {drift:.3e} (limit {limit:.1e})")]
    NormDrift { drift: f64, limit: f64 },

    #[error("determinant and Fock amplitudes differ by {difference:.3e} (tolerance {tolerance:.1e})")]
    OracleMismatch { difference: f64, tolerance: f64 },

    #[error("unknown mode label {0}")]
    UnknownLabel(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Numerical-tolerance failures, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Unitarity { .. }
                | Error::IllConditioned { .. }
                | Error::NormDrift { .. }
                | Error::OracleMismatch { .. }
                | Error::EnumerationBudget { .. }
        )
    }

    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_) | Error::InvalidInput(_))
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
