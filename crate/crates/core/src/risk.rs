//! Risk-sensitive long-run rates.
//!
//! For a closed-loop kernel `P`, running cost `f` and risk factor `α ≠ 0`,
//!
//! ```text
//! Ψg(x) = f(x) + (1/α) ln Σ_y e^{α g(y)} P(x, y)
//! ```
//!
//! is non-expansive in the span seminorm, and a contraction under uniform
//! ergodicity. Its fixed point modulo constants solves the multiplicative
//! Poisson equation `w(x) + λ = Ψw(x)`, and `λ` is the long-run rate
//! `lim (1/(αn)) ln E_x exp(α Σ_{i<n} f(X_i))`.
//!
//! Every exponential is evaluated in shifted log-space.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{closed_loop, CostFunction, Distribution, KernelFamily, MarkovControl, StochasticMatrix};
use crate::ergodicity::GapWithBound;
use crate::error::{Error, Result};
use crate::search::{indicator, subsets, SearchBudget};

/// Smallest admissible `|α|`; below this use the average-cost functional.
pub const MIN_ABS_ALPHA: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct RiskFactor(f64);

impl RiskFactor {
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha.abs() < MIN_ABS_ALPHA {
            return Err(Error::InvalidArgument(format!(
                "risk factor {alpha} must be finite with |alpha| >= {MIN_ABS_ALPHA}"
            )));
        }
        Ok(Self(alpha))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for RiskFactor {
    type Error = Error;

    fn try_from(alpha: f64) -> Result<Self> {
        Self::new(alpha)
    }
}

impl From<RiskFactor> for f64 {
    fn from(alpha: RiskFactor) -> f64 {
        alpha.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 100_000 }
    }
}

/// Solution `(λ, w)` of the multiplicative Poisson equation, anchored at `w(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskSolution {
    pub alpha: f64,
    pub lambda: f64,
    pub w: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    /// Last observed ratio `span(g_{k+1} − g_k) / span(g_k − g_{k−1})`.
    #[serde(skip)]
    pub contraction_ratio: Option<f64>,
}

impl RiskSolution {
    pub fn span(&self) -> f64 {
        span_seminorm(&self.w)
    }
}

/// `max g − min g`.
pub fn span_seminorm(g: &[f64]) -> f64 {
    let (lo, hi) = g
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if g.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// `ln Σ_y w(y) e^{s(y)}` over `w(y) > 0`, shifted by the largest exponent.
fn log_weighted_sum(weights: &[f64], exponents: impl Iterator<Item = f64> + Clone) -> f64 {
    let shift = weights
        .iter()
        .zip(exponents.clone())
        .filter(|(&w, _)| w > 0.0)
        .map(|(_, s)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = weights
        .iter()
        .zip(exponents)
        .filter(|(&w, _)| w > 0.0)
        .map(|(&w, s)| w * (s - shift).exp())
        .sum();
    shift + sum.ln()
}

/// `(1/α) ln Σ_y w(y) e^{α g(y)}`, centred at the mean of `g` so that the
/// division by a small `α` does not amplify rounding.
fn certainty_equivalent(weights: &[f64], g: &[f64], a: f64) -> f64 {
    let support = || weights.iter().zip(g).filter(|(&w, _)| w > 0.0);
    let mean: f64 = support().map(|(&w, &v)| w * v).sum();
    let t_max = support().map(|(_, &v)| a * (v - mean)).fold(f64::NEG_INFINITY, f64::max);
    let log_mgf = if t_max <= 1.0 {
        support().map(|(&w, &v)| w * (a * (v - mean)).exp_m1()).sum::<f64>().ln_1p()
    } else {
        log_weighted_sum(weights, g.iter().map(|&v| a * (v - mean)))
    };
    mean + log_mgf / a
}

/// `(Ψg)(x) = f(x) + (1/α) ln Σ_y e^{α g(y)} P(x, y)`.
pub fn apply_psi(p: &StochasticMatrix, f: &[f64], alpha: RiskFactor, g: &[f64]) -> Vec<f64> {
    let a = alpha.value();
    p.rows().zip(f).map(|(row, &fx)| fx + certainty_equivalent(row, g, a)).collect()
}

fn check_lengths(p: &StochasticMatrix, vectors: &[&[f64]]) -> Result<()> {
    for v in vectors {
        if v.len() != p.n() {
            return Err(Error::DimensionMismatch { expected: p.n(), found: v.len() });
        }
    }
    Ok(())
}

/// Relative-value iteration `g ← Ψg − (Ψg)(0)` until the span of successive
/// differences falls below `tol`.
///
/// The tolerance scales with `max(1, ‖f‖∞)`. On return `λ = (Ψw)(0)` and the
/// residual `max_x |Ψw(x) − w(x) − λ|` is at most ten tolerances.
pub fn solve_risk_poisson(
    p: &StochasticMatrix,
    f: &[f64],
    alpha: RiskFactor,
    opts: &SolverOptions,
) -> Result<RiskSolution> {
    check_lengths(p, &[f])?;
    let scale = f.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = opts.tol * scale;
    let mut g = vec![0.0; p.n()];
    let mut last_step: Option<f64> = None;
    let mut ratio = None;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut next = apply_psi(p, f, alpha, &g);
        let anchor = next[0];
        next.iter_mut().for_each(|v| *v -= anchor);
        let diff: Vec<f64> = next.iter().zip(&g).map(|(a, b)| a - b).collect();
        let step = span_seminorm(&diff);
        if let Some(prev) = last_step {
            if prev > 0.0 && step > 0.0 {
                ratio = Some(step / prev);
            }
        }
        last_step = Some(step);
        g = next;
        if step < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence(opts.max_iter));
    }
    let psi = apply_psi(p, f, alpha, &g);
    let lambda = psi[0] - g[0];
    let residual = psi.iter().zip(&g).map(|(a, b)| (a - b - lambda).abs()).fold(0.0, f64::max);
    if residual > 10.0 * tol {
        return Err(Error::ToleranceViolation(format!("Poisson residual {residual:.3e}")));
    }
    let (lo, hi) = f.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lambda < lo - 10.0 * tol || lambda > hi + 10.0 * tol {
        return Err(Error::ToleranceViolation(format!("lambda {lambda} outside [{lo}, {hi}]")));
    }
    Ok(RiskSolution {
        alpha: alpha.value(),
        lambda,
        w: g,
        residual,
        iterations,
        contraction_ratio: ratio,
    })
}

/// Power-iteration oracle: `λ = (1/α) ln ρ(diag(e^{αf}) P)`.
///
/// Iterates from the all-ones vector; the Collatz–Wielandt quotients
/// `min_x (Mv)(x)/v(x) ≤ ρ ≤ max_x (Mv)(x)/v(x)` bracket the Perron root,
/// and iteration stops once the bracket is narrower than `1e-13` relative.
pub fn perron_lambda_oracle(p: &StochasticMatrix, f: &[f64], alpha: RiskFactor) -> Result<f64> {
    const MAX_STEPS: usize = 1_000_000;
    check_lengths(p, &[f])?;
    let a = alpha.value();
    let shift = f.iter().map(|&v| a * v).fold(f64::NEG_INFINITY, f64::max);
    let scale: Vec<f64> = f.iter().map(|&v| (a * v - shift).exp()).collect();
    let mut v = vec![1.0; p.n()];
    for _ in 0..MAX_STEPS {
        let mv: Vec<f64> = p.apply(&v).iter().zip(&scale).map(|(pv, s)| pv * s).collect();
        let (lo, hi) = mv
            .iter()
            .zip(&v)
            .map(|(m, x)| m / x)
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), q| (lo.min(q), hi.max(q)));
        if hi - lo <= 1e-13 * hi {
            let rho = 0.5 * (lo + hi);
            return Ok((rho.ln() + shift) / a);
        }
        let norm = mv.iter().copied().fold(0.0, f64::max);
        v = mv.iter().map(|x| x / norm).collect();
        if v.iter().any(|&x| x <= 0.0) {
            // a state whose mass vanished has no Collatz–Wielandt quotient
            v.iter_mut().for_each(|x| *x = x.max(f64::MIN_POSITIVE));
        }
    }
    Err(Error::NoConvergence(MAX_STEPS))
}

/// `ν(y) ∝ e^{α g(y)} P(x, y)`.
pub fn tilted_measure(p: &StochasticMatrix, x: usize, alpha: RiskFactor, g: &[f64]) -> Result<Distribution> {
    check_lengths(p, &[g])?;
    let a = alpha.value();
    let row = p.row(x);
    let log_norm = log_weighted_sum(row, g.iter().map(|&v| a * v));
    if log_norm == f64::NEG_INFINITY {
        return Err(Error::DegenerateRow(x));
    }
    let nu: Vec<f64> = row
        .iter()
        .zip(g)
        .map(|(&w, &gy)| if w > 0.0 { w * (a * gy - log_norm).exp() } else { 0.0 })
        .collect();
    let total: f64 = nu.iter().sum();
    Ok(Distribution::from_vec_unchecked(nu.iter().map(|v| v / total).collect()))
}

/// `H(ν₁, ν₂) = Σ ν₁ ln(ν₁/ν₂)`; `+∞` unless `ν₁ ≪ ν₂`.
pub fn relative_entropy(nu1: &Distribution, nu2: &Distribution) -> f64 {
    let mut h = 0.0;
    for (&a, &b) in nu1.probs().iter().zip(nu2.probs()) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            h += a * (a / b).ln();
        }
    }
    h.max(0.0)
}

/// `f(x) + ν(g) − (1/α) H(ν, P(x, ·))`.
///
/// Maximized over `ν` when `α > 0` and minimized when `α < 0`, with the
/// tilted measure as optimizer and `(Ψg)(x)` as the optimal value.
pub fn dual_representation_value(
    p: &StochasticMatrix,
    f: &[f64],
    x: usize,
    alpha: RiskFactor,
    g: &[f64],
    nu: &Distribution,
) -> f64 {
    let h = relative_entropy(nu, &p.row_distribution(x));
    if h.is_infinite() {
        return if alpha.value() > 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
    }
    f[x] + nu.integrate(g) - h / alpha.value()
}

/// `ln E_x exp(α (Σ_{i<k} f(X_i) + terminal(X_k)))` for every start `x`,
/// by backward recursion in log space.
pub fn log_moments(p: &StochasticMatrix, f: &[f64], alpha: f64, k: usize, terminal: Option<&[f64]>) -> Vec<f64> {
    let mut lv: Vec<f64> = match terminal {
        Some(w) => w.iter().map(|&v| alpha * v).collect(),
        None => vec![0.0; p.n()],
    };
    for _ in 0..k {
        lv = p
            .rows()
            .zip(f)
            .map(|(row, &fy)| alpha * fy + log_weighted_sum(row, lv.iter().copied()))
            .collect();
    }
    lv
}

/// `ln E_x exp(α Σ_{i<k} f(X_i))`.
pub fn finite_horizon_log_moment(
    p: &StochasticMatrix,
    f: &[f64],
    alpha: RiskFactor,
    k: usize,
    x: usize,
) -> Result<f64> {
    check_lengths(p, &[f])?;
    if k == 0 {
        return Err(Error::InvalidArgument("horizon k must be positive".into()));
    }
    Ok(log_moments(p, f, alpha.value(), k, None)[x])
}

/// `λ(u)` for running cost `f`.
pub fn risk_lambda(family: &KernelFamily, u: &MarkovControl, f: &[f64], alpha: RiskFactor) -> Result<RiskSolution> {
    solve_risk_poisson(&closed_loop(family, u)?, f, alpha, &SolverOptions::default())
}

/// Proximity of two rates through k-step log-moments at the anchor state:
/// `|λ₁ − λ₂| ≤ (1/k)(|(1/α)(L₁ − L₂)| + span(w₁) + span(w₂))`.
///
/// The bound's `2·D` with `D = max span` dominates the two spans used here.
pub fn rate_proximity(
    p1: &StochasticMatrix,
    f1: &[f64],
    p2: &StochasticMatrix,
    f2: &[f64],
    alpha: RiskFactor,
    k: usize,
) -> Result<GapWithBound> {
    if k == 0 {
        return Err(Error::InvalidArgument("horizon k must be positive".into()));
    }
    let opts = SolverOptions::default();
    let s1 = solve_risk_poisson(p1, f1, alpha, &opts)?;
    let s2 = solve_risk_poisson(p2, f2, alpha, &opts)?;
    let l1 = finite_horizon_log_moment(p1, f1, alpha, k, 0)?;
    let l2 = finite_horizon_log_moment(p2, f2, alpha, k, 0)?;
    let d = s1.span().max(s2.span());
    let gap = (s1.lambda - s2.lambda).abs();
    let bound = (((l1 - l2) / alpha.value()).abs() + 2.0 * d) / k as f64;
    if gap > bound + 1e-10 {
        return Err(Error::ToleranceViolation(format!("rate gap {gap} exceeds bound {bound}")));
    }
    Ok(GapWithBound { gap, bound })
}

/// [`rate_proximity`] for one running cost under two controls.
pub fn lambda_proximity_bound(
    family: &KernelFamily,
    u1: &MarkovControl,
    u2: &MarkovControl,
    f: &[f64],
    alpha: RiskFactor,
    k: usize,
) -> Result<GapWithBound> {
    rate_proximity(&closed_loop(family, u1)?, f, &closed_loop(family, u2)?, f, alpha, k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetRateGap {
    pub gap: f64,
    pub worst_set: Vec<bool>,
    pub exact: bool,
}

/// `max_B |λ^{u1}(1_B) − λ^{u2}(1_B)|` over state subsets.
pub fn set_rate_gap(
    family: &KernelFamily,
    u1: &MarkovControl,
    u2: &MarkovControl,
    alpha: RiskFactor,
    budget: &SearchBudget,
) -> Result<SetRateGap> {
    let p1 = closed_loop(family, u1)?;
    let p2 = closed_loop(family, u2)?;
    let (sets, exact) = subsets(family.n(), budget);
    let opts = SolverOptions::default();
    let gaps: Vec<f64> = sets
        .par_iter()
        .map(|mask| {
            let f = indicator(mask);
            let l1 = solve_risk_poisson(&p1, &f, alpha, &opts)?.lambda;
            let l2 = solve_risk_poisson(&p2, &f, alpha, &opts)?.lambda;
            Ok((l1 - l2).abs())
        })
        .collect::<Result<_>>()?;
    let (best, gap) = gaps
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(bi, bg), (i, &g)| if g > bg { (i, g) } else { (bi, bg) });
    Ok(SetRateGap { gap, worst_set: sets[best].clone(), exact })
}

/// `I^α(u) = α λ^{u,α}(c_u)`.
pub fn risk_functional_rate(
    family: &KernelFamily,
    u: &MarkovControl,
    cost: &CostFunction,
    alpha: RiskFactor,
) -> Result<f64> {
    let cu = cost.closed_loop(u)?;
    Ok(alpha.value() * risk_lambda(family, u, &cu, alpha)?.lambda)
}
