//! The five-state reference instance used by the problem suite.

use crate::chain::{ControlSet, CostFunction, KernelFamily, MarkovControl};
use crate::embedded::BallPair;

pub const CANONICAL_STATES: usize = 5;
/// Control grid used for suprema over Markov controls.
pub const CANONICAL_GRID_STEP: f64 = 0.25;

fn normalized(weight: impl Fn(usize, usize) -> f64) -> Vec<Vec<f64>> {
    (0..CANONICAL_STATES)
        .map(|x| {
            let row: Vec<f64> = (0..CANONICAL_STATES).map(|y| weight(x, y)).collect();
            let total: f64 = row.iter().sum();
            row.into_iter().map(|v| v / total).collect()
        })
        .collect()
}

/// Mixture with `Q0(x,y) ∝ 1 + ((x+y) mod 5)` and `Q1(x,y) ∝ 1 + ((xy+1) mod 5)`.
pub fn canonical_family() -> KernelFamily {
    let n = CANONICAL_STATES;
    let q0 = normalized(|x, y| 1.0 + ((x + y) % n) as f64);
    let q1 = normalized(|x, y| 1.0 + ((x * y + 1) % n) as f64);
    KernelFamily::mixture(ControlSet::grid(CANONICAL_GRID_STEP).expect("valid step"), q0, q1)
        .expect("canonical rows are positive and stochastic")
}

/// `u(x) = (2x + 1) / 10`.
pub fn canonical_target() -> MarkovControl {
    MarkovControl::new((0..CANONICAL_STATES).map(|x| (2 * x + 1) as f64 / 10.0).collect())
}

/// `c(x, a) = x/4 + a/2`.
pub fn canonical_cost() -> CostFunction {
    let c0 = (0..CANONICAL_STATES).map(|x| x as f64 / 4.0).collect();
    CostFunction::linear(c0, vec![0.5; CANONICAL_STATES]).expect("finite coefficients")
}

/// `R = {0, 1}`, `R₁ = {0, 1, 2}`.
pub fn canonical_balls() -> BallPair {
    BallPair::new(vec![0, 1], vec![0, 1, 2], CANONICAL_STATES).expect("nested balls")
}
