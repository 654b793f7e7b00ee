//! Online matching of blood donors to donation opportunities under
//! proportional-fairness constraints.
//!
//! The crate is `no_std` (with `alloc`) and contains everything that is pure
//! computation:
//!
//! * [`graph`]: the scenario model (donors, recipients, edges, weights,
//!   availability, schedules) and outcome validation.
//! * [`solver`]: a dense-tableau simplex, best-first branch-and-bound and the
//!   offline / LP / non-adaptive / rate-limited formulations built on them.
//! * [`policy`]: Rand, Max, RandMax, NAdapLP, NAdapOpt, AdaptMatch and
//!   NAdapLP_Rate, plus the pre-match plan machinery.
//! * [`sim`]: realizations, time-stepped policy execution, normalization
//!   scores and Monte Carlo aggregation.
//! * [`metrics`]: Gamma, expected proportionality and weight fractions.
//! * [`synth`]: synthetic city generation.
//! * [`oracle`]: exhaustive reference implementations for tiny instances.
//!
//! File formats, the CLI and plotting live in the companion `bloodmatch`
//! crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod graph;
pub mod metrics;
pub mod oracle;
pub mod policy;
pub mod rng;
pub mod sim;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{
    DemandRealization, DonorIdx, EdgeIdx, LatLon, MatchingOutcome, Regime, RecipientIdx,
    RecipientKind, Scenario, ScenarioBuilder, StepValues, Violation,
};
pub use policy::{PolicyKind, PolicySpec, PreparedPolicy};
pub use solver::{LpSolution, SolutionKind, Solver};
