use alloc::string::String;
use alloc::vec::Vec;

use crate::graph::Violation;
use crate::solver::SolverError;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("time step {step} is outside 1..={horizon}")]
    StepOutOfRange { step: usize, horizon: usize },

    #[error("invalid scenario ({} violation(s)){}", .0.len(), first_violation(.0))]
    InvalidScenario(Vec<Violation>),

    #[error("recipient {recipient} has normalization score {value}; gamma > 0 needs every m_v > 0")]
    NonPositiveNormalization { recipient: String, value: f64 },

    #[error("scenario has no normalization scores; gamma > 0 needs them")]
    MissingNormalization,

    #[error("pre-match distribution for donor {donor} at step {step} has mass {mass:.9} > 1")]
    InvalidPlan { donor: String, step: usize, mass: f64 },

    #[error("enumeration bound exceeded: {0}")]
    EnumerationBound(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Solver(#[from] SolverError),
}

fn first_violation(v: &[Violation]) -> String {
    match v.first() {
        Some(first) => alloc::format!(": {first}"),
        None => String::new(),
    }
}
