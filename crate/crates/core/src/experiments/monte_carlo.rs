//! Seeded simulation of long-run averages, for diagnostics only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::average_cost::stationary_average;
use crate::chain::{closed_loop, CostFunction, KernelFamily, MarkovControl};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub steps: usize,
    pub replications: usize,
    pub seed: u64,
    pub estimate: f64,
    pub std_error: f64,
    pub exact: f64,
    /// `(estimate − exact) / std_error`.
    pub z: f64,
}

/// Mean over `replications` independent paths of `(1/steps) Σ c(X_i, u(X_i))`
/// from `x0`, next to the exact stationary value.
pub fn monte_carlo_average(
    family: &KernelFamily,
    u: &MarkovControl,
    cost: &CostFunction,
    x0: usize,
    steps: usize,
    replications: usize,
    seed: u64,
) -> Result<McReport> {
    if steps == 0 || replications < 2 {
        return Err(Error::InvalidArgument("need steps >= 1 and replications >= 2".into()));
    }
    let p = closed_loop(family, u)?;
    if x0 >= p.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), found: x0 + 1 });
    }
    let c = cost.closed_loop(u)?;
    let exact = stationary_average(family, u, cost)?.value;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<f64> = (0..replications)
        .map(|_| {
            let mut x = x0;
            let mut total = 0.0;
            for _ in 0..steps {
                total += c[x];
                let r: f64 = rng.random();
                let row = p.row(x);
                let mut acc = 0.0;
                // inverse CDF; the last positive entry absorbs rounding
                x = row
                    .iter()
                    .position(|&q| {
                        acc += q;
                        r < acc
                    })
                    .unwrap_or_else(|| row.iter().rposition(|&q| q > 0.0).unwrap_or(x));
            }
            total / steps as f64
        })
        .collect();
    let r = replications as f64;
    let estimate = means.iter().sum::<f64>() / r;
    let var = means.iter().map(|m| (m - estimate).powi(2)).sum::<f64>() / (r - 1.0);
    let std_error = (var / r).sqrt();
    let z = if std_error > 0.0 { (estimate - exact) / std_error } else { 0.0 };
    Ok(McReport { steps, replications, seed, estimate, std_error, exact, z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::canonical::{canonical_cost, canonical_family, canonical_target};

    #[test]
    fn seeded_runs_repeat_and_land_near_exact() {
        let (fam, u, cost) = (canonical_family(), canonical_target(), canonical_cost());
        let a = monte_carlo_average(&fam, &u, &cost, 0, 2000, 20, 11).unwrap();
        let b = monte_carlo_average(&fam, &u, &cost, 0, 2000, 20, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.z.abs() < 6.0, "{a:?}");
    }
}
