//! Stability and continuity checks for finite controlled Markov chains.
//!
//! Kernel families `P^a(x, ·)` indexed by a control parameter `a ∈ [0, 1]`
//! are closed by Markov controls `u`. The crate certifies uniform ergodicity,
//! computes invariant measures, average and risk-sensitive costs, the
//! return-time embedding, and the small-risk limit, each next to an
//! independent oracle or explicit bound.

pub mod asymptotics;
pub mod average_cost;
pub mod chain;
pub mod embedded;
pub mod ergodicity;
pub mod error;
pub mod experiments;
mod linalg;
pub mod model;
pub mod risk;
pub mod search;

pub use chain::{
    closed_loop, k_step, total_variation, tv_distance, validate_family, ControlSet, CostFunction, Distribution,
    Kernel, KernelFamily, MarkovControl, StateSpace, StochasticMatrix, ValidationReport,
};
pub use embedded::BallPair;
pub use ergodicity::{ErgodicityCertificate, GapWithBound, MeCertificate};
pub use error::{Error, Result};
pub use model::Model;
pub use risk::{RiskFactor, RiskSolution, SolverOptions};
pub use search::SearchBudget;
