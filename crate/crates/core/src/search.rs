//! Enumeration of Markov controls and state subsets for suprema.
//!
//! Suprema over all Markov controls range over the product `Gᴺ` of the
//! control grid. They are exhaustive while `|G|ᴺ` fits the budget and fall
//! back to seeded uniform sampling otherwise; callers carry the `exact`
//! flag into their certificates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{KernelFamily, MarkovControl};

pub const DEFAULT_ENUMERATION_BUDGET: u64 = 1_000_000;
pub const DEFAULT_SAMPLES: usize = 10_000;
/// Largest state count for which all `2ᴺ` subsets are enumerated.
pub const MAX_EXHAUSTIVE_SUBSET_STATES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub max_enumeration: u64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self { max_enumeration: DEFAULT_ENUMERATION_BUDGET, samples: DEFAULT_SAMPLES, seed: 0 }
    }
}

impl SearchBudget {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }
}

fn fits(base: usize, exp: usize, budget: u64) -> bool {
    (base as u128).checked_pow(exp as u32).is_some_and(|total| total <= budget as u128)
}

/// Iterator over Markov controls drawn from the family's control grid.
#[derive(Debug, Clone)]
pub struct ControlSweep {
    grid: Vec<f64>,
    n: usize,
    mode: SweepMode,
}

#[derive(Debug, Clone)]
enum SweepMode {
    Exhaustive { digits: Vec<usize>, done: bool },
    Sampled { rng: Box<ChaCha8Rng>, remaining: usize },
}

impl ControlSweep {
    pub fn new(family: &KernelFamily, budget: &SearchBudget) -> Self {
        let grid = family.control_values();
        let n = family.n();
        let mode = if fits(grid.len(), n, budget.max_enumeration) {
            SweepMode::Exhaustive { digits: vec![0; n], done: false }
        } else {
            SweepMode::Sampled { rng: Box::new(ChaCha8Rng::seed_from_u64(budget.seed)), remaining: budget.samples }
        };
        Self { grid, n, mode }
    }

    /// True when the sweep visits every grid control.
    pub fn exact(&self) -> bool {
        matches!(self.mode, SweepMode::Exhaustive { .. })
    }
}

impl Iterator for ControlSweep {
    type Item = MarkovControl;

    fn next(&mut self) -> Option<MarkovControl> {
        let g = self.grid.len();
        match &mut self.mode {
            SweepMode::Exhaustive { digits, done } => {
                if *done {
                    return None;
                }
                let u = MarkovControl::new(digits.iter().map(|&d| self.grid[d]).collect());
                // odometer increment
                let mut carry = true;
                for d in digits.iter_mut() {
                    *d += 1;
                    if *d < g {
                        carry = false;
                        break;
                    }
                    *d = 0;
                }
                *done = carry;
                Some(u)
            }
            SweepMode::Sampled { rng, remaining } => {
                if *remaining == 0 {
                    return None;
                }
                *remaining -= 1;
                Some(MarkovControl::new((0..self.n).map(|_| self.grid[rng.random_range(0..g)]).collect()))
            }
        }
    }
}

/// State subsets as membership masks.
///
/// All `2ᴺ` subsets when `N ≤ 16` and `2ᴺ ≤ budget`; otherwise `∅`, `E` and
/// `budget.samples` seeded random subsets. The flag reports exhaustiveness.
pub fn subsets(n: usize, budget: &SearchBudget) -> (Vec<Vec<bool>>, bool) {
    if n <= MAX_EXHAUSTIVE_SUBSET_STATES && fits(2, n, budget.max_enumeration) {
        let sets = (0u32..(1u32 << n)).map(|mask| (0..n).map(|y| mask >> y & 1 == 1).collect()).collect();
        return (sets, true);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let mut sets = vec![vec![false; n], vec![true; n]];
    sets.extend((0..budget.samples).map(|_| (0..n).map(|_| rng.random_bool(0.5)).collect()));
    (sets, false)
}

/// Indicator function `1_B` of a mask.
pub fn indicator(mask: &[bool]) -> Vec<f64> {
    mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}
