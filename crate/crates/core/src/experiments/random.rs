//! Seeded random instances for tests and benchmarks.

use rand::Rng;

use crate::chain::{ControlSet, KernelFamily, MarkovControl};
use crate::embedded::BallPair;

/// Mixture family whose `Q0`, `Q1` entries are drawn from `[0.05, 1)` before
/// row normalization, so every kernel entry is positive.
pub fn random_positive_family<R: Rng>(rng: &mut R, n: usize, grid_step: f64) -> KernelFamily {
    let mut matrix = || -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                let row: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
                let total: f64 = row.iter().sum();
                row.into_iter().map(|v| v / total).collect()
            })
            .collect()
    };
    let q0 = matrix();
    let q1 = matrix();
    KernelFamily::mixture(ControlSet::grid(grid_step).expect("valid grid step"), q0, q1)
        .expect("positive stochastic rows")
}

/// Control with independent uniform values in `[0, 1]`.
pub fn random_control<R: Rng>(rng: &mut R, n: usize) -> MarkovControl {
    MarkovControl::new((0..n).map(|_| rng.random::<f64>()).collect())
}

/// `R ⊆ R₁ ⊊ E` with `R` nonempty; requires `n ≥ 2`.
pub fn random_balls<R: Rng>(rng: &mut R, n: usize) -> BallPair {
    assert!(n >= 2, "balls need at least two states");
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let r1_size = rng.random_range(1..n);
    let r_size = rng.random_range(1..=r1_size);
    BallPair::new(order[..r_size].to_vec(), order[..r1_size].to_vec(), n).expect("nested by construction")
}

/// Probability vector with a random support of at least one point.
pub fn random_probabilities<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut p: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.8) { rng.random::<f64>() } else { 0.0 }).collect();
    if p.iter().all(|&v| v == 0.0) {
        p[rng.random_range(0..n)] = 1.0;
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}
