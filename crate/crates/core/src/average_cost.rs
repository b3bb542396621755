//! Long-run average cost `J(u)`.
//!
//! Under ergodicity the Cesàro limit equals the stationary integral
//! `Σ_y π^u(y) c(y, u(y))`; finite horizons are evaluated exactly by
//! propagating `δ_x P^i` and carry the Doob error bound.

use serde::{Deserialize, Serialize};

use crate::chain::{closed_loop, CostFunction, KernelFamily, MarkovControl, StochasticMatrix};
use crate::ergodicity::invariant_distribution;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Horizon {
    Stationary,
    Steps(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AverageCostResult {
    pub value: f64,
    pub horizon: Horizon,
    pub error_bound: f64,
}

/// `J(u) = Σ_y π^u(y) c(y, u(y))`; the same for every initial state.
pub fn stationary_average(family: &KernelFamily, u: &MarkovControl, cost: &CostFunction) -> Result<AverageCostResult> {
    let p = closed_loop(family, u)?;
    let pi = invariant_distribution(&p)?;
    let cu = cost.closed_loop(u)?;
    let (lo, hi) = cost.bounds();
    let value = pi.integrate(&cu).clamp(lo, hi);
    Ok(AverageCostResult { value, horizon: Horizon::Stationary, error_bound: 0.0 })
}

/// `(1/n) Σ_{i<n} (δ_x Pⁱ) · f`, computed exactly.
pub fn cesaro_mean(p: &StochasticMatrix, f: &[f64], x: usize, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    if x >= p.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), found: x + 1 });
    }
    let mut mu = vec![0.0; p.n()];
    mu[x] = 1.0;
    let mut total = 0.0;
    for i in 0..n {
        if i > 0 {
            mu = p.push_forward(&mu);
        }
        total += crate::chain::dot(&mu, f);
    }
    Ok(total / n as f64)
}

/// Finite-horizon average `(1/n) E_x Σ_{i<n} c(X_i, u(X_i))`.
pub fn cesaro_average(
    family: &KernelFamily,
    u: &MarkovControl,
    cost: &CostFunction,
    x: usize,
    n: usize,
) -> Result<f64> {
    let p = closed_loop(family, u)?;
    cesaro_mean(&p, &cost.closed_loop(u)?, x, n)
}

/// `range / (n (1 − Δ))`: distance between the n-step Cesàro average and the
/// stationary value under a certificate `Δ < 1`.
pub fn cesaro_error_bound(range: f64, n: usize, delta: f64) -> f64 {
    if delta >= 1.0 {
        return f64::INFINITY;
    }
    range / (n as f64 * (1.0 - delta))
}

/// [`cesaro_average`] packaged with its Doob error bound.
pub fn cesaro_result(
    family: &KernelFamily,
    u: &MarkovControl,
    cost: &CostFunction,
    x: usize,
    n: usize,
    delta: f64,
) -> Result<AverageCostResult> {
    Ok(AverageCostResult {
        value: cesaro_average(family, u, cost, x, n)?,
        horizon: Horizon::Steps(n),
        error_bound: cesaro_error_bound(cost.range(), n, delta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::ControlSet;
    use approx::assert_abs_diff_eq;

    fn fixed(rows: Vec<Vec<f64>>) -> KernelFamily {
        KernelFamily::mixture(ControlSet::grid(0.25).unwrap(), rows.clone(), rows).unwrap()
    }

    #[test]
    fn constant_cost_averages_to_constant() {
        let fam = fixed(vec![vec![0.7, 0.3], vec![0.2, 0.8]]);
        let u = MarkovControl::constant(2, 0.5);
        let r = stationary_average(&fam, &u, &CostFunction::constant(2, 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-15);
        assert_eq!(r.horizon, Horizon::Stationary);
    }

    #[test]
    fn two_state_stationary_value() {
        let fam = fixed(vec![vec![0.7, 0.3], vec![0.2, 0.8]]);
        let cost = CostFunction::state_only(vec![0.0, 1.0]).unwrap();
        let r = stationary_average(&fam, &MarkovControl::constant(2, 0.0), &cost).unwrap();
        assert_abs_diff_eq!(r.value, 0.6, epsilon = 1e-14);
    }

    #[test]
    fn control_only_cost() {
        let fam = fixed(vec![vec![0.7, 0.3], vec![0.2, 0.8]]);
        let cost = CostFunction::linear(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let r = stationary_average(&fam, &MarkovControl::constant(2, 0.25), &cost).unwrap();
        assert_abs_diff_eq!(r.value, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn non_unique_stationary_propagates() {
        let fam = fixed(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let cost = CostFunction::constant(2, 1.0).unwrap();
        assert!(matches!(
            stationary_average(&fam, &MarkovControl::constant(2, 0.0), &cost),
            Err(Error::NonUniqueStationary { .. })
        ));
    }

    #[test]
    fn cesaro_single_term_and_rank_one() {
        let mu = vec![0.25, 0.75];
        let fam = fixed(vec![mu.clone(), mu.clone()]);
        let cost = CostFunction::linear(vec![2.0, -1.0], vec![1.0, 0.5]).unwrap();
        let u = MarkovControl::new(vec![0.5, 1.0]);
        let cu = cost.closed_loop(&u).unwrap();
        for x in 0..2 {
            assert_abs_diff_eq!(cesaro_average(&fam, &u, &cost, x, 1).unwrap(), cu[x], epsilon = 1e-15);
            let pi_c = mu[0] * cu[0] + mu[1] * cu[1];
            for n in [2usize, 5, 40] {
                let expected = cu[x] / n as f64 + (n - 1) as f64 / n as f64 * pi_c;
                assert_abs_diff_eq!(cesaro_average(&fam, &u, &cost, x, n).unwrap(), expected, epsilon = 1e-13);
            }
        }
        assert!(cesaro_average(&fam, &u, &cost, 0, 0).is_err());
    }

    #[test]
    fn error_bound_without_certificate_is_infinite() {
        assert!(cesaro_error_bound(1.0, 10, 1.0).is_infinite());
        assert_abs_diff_eq!(cesaro_error_bound(2.0, 10, 0.5), 0.4);
    }
}
