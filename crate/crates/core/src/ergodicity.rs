//! Uniform-ergodicity certificates and stability of invariant measures.
//!
//! * [`dobrushin_coefficient`] computes `Δ = sup TV(P^a(x,·), P^{a'}(x',·))`
//!   (or its m-step analogue over pairs of Markov controls).
//! * [`me_constant`] computes the ratio constant `K` of m-step rows.
//! * [`invariant_distribution`] solves `πP = π` after a structural
//!   uniqueness check, and [`doob_gap`] measures `max_x TV(Pⁿ(x,·), π)`,
//!   which a certificate bounds by `Δⁿ`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chain::{closed_loop, k_step, tv_distance, Distribution, KernelFamily, MarkovControl, StochasticMatrix};
use crate::error::{Error, Result};
use crate::linalg::{closed_classes, solve};
use crate::search::{ControlSweep, SearchBudget};

/// Residual allowed for `‖πP − π‖∞` after the stationary solve.
pub const STATIONARY_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityCertificate {
    pub delta: f64,
    pub m: usize,
    pub exact: bool,
    pub budget: u64,
    pub seed: u64,
}

impl ErgodicityCertificate {
    /// Uniform ergodicity holds when `Δ < 1`.
    pub fn holds(&self) -> bool {
        self.delta < 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeCertificate {
    /// `f64::INFINITY` when some pair of m-step rows is not mutually absolutely continuous.
    #[serde(rename = "K", with = "infinite_as_null")]
    pub k: f64,
    pub m: usize,
    pub exact: bool,
    pub budget: u64,
    pub seed: u64,
}

impl MeCertificate {
    pub fn holds(&self) -> bool {
        self.k.is_finite()
    }
}

/// Serializes `+∞` as `null` so that the record stays valid JSON.
pub(crate) mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() { Some(*v) } else { None }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidArgument("iteration m must be positive".into()));
    }
    Ok(())
}

/// Largest TV distance between any two rows of `pool`.
///
/// Uses `max_B (max_r r(B) − min_r r(B))` over all subsets when that is
/// cheaper than the pairwise scan.
pub fn max_pairwise_tv(pool: &[Vec<f64>]) -> f64 {
    let Some(first) = pool.first() else { return 0.0 };
    let n = first.len();
    let rows = pool.len() as f64;
    let subset_cost = if n < 30 { rows * (1u64 << n) as f64 } else { f64::INFINITY };
    let pair_cost = rows * rows * n as f64 / 2.0;
    if subset_cost < pair_cost {
        let size = 1usize << n;
        let mut hi = vec![f64::NEG_INFINITY; size];
        let mut lo = vec![f64::INFINITY; size];
        let mut sums = vec![0.0; size];
        for row in pool {
            for mask in 1..size {
                let low = mask.trailing_zeros() as usize;
                sums[mask] = sums[mask & (mask - 1)] + row[low];
            }
            for mask in 0..size {
                hi[mask] = hi[mask].max(sums[mask]);
                lo[mask] = lo[mask].min(sums[mask]);
            }
        }
        hi.iter().zip(&lo).map(|(h, l)| h - l).fold(0.0, f64::max).clamp(0.0, 1.0)
    } else {
        let mut best: f64 = 0.0;
        for (i, a) in pool.iter().enumerate() {
            for b in &pool[i + 1..] {
                best = best.max(tv_distance(a, b));
            }
        }
        best
    }
}

/// The (UE) coefficient of the family at iteration `m`.
///
/// For `m = 1` the supremum runs over every row `P^a(x, ·)` on the control
/// grid. For mixtures this is exact over all of `[0, 1]`, since TV between
/// two mixture rows is convex in the pair of controls and the grid contains
/// both endpoints. For `m > 1` it runs over pairs of Markov controls from
/// [`ControlSweep`].
pub fn dobrushin_coefficient(
    family: &KernelFamily,
    m: usize,
    budget: &SearchBudget,
) -> Result<ErgodicityCertificate> {
    check_m(m)?;
    let (pool, exact) = if m == 1 {
        (family.grid_rows().into_iter().map(|(_, _, row)| row).collect::<Vec<_>>(), true)
    } else {
        let sweep = ControlSweep::new(family, budget);
        let exact = sweep.exact();
        let mut pool = Vec::new();
        for u in sweep {
            let pm = k_step(&closed_loop(family, &u)?, m);
            pool.extend(pm.to_rows());
        }
        (pool, exact)
    };
    Ok(ErgodicityCertificate {
        delta: max_pairwise_tv(&pool),
        m,
        exact,
        budget: budget.max_enumeration,
        seed: budget.seed,
    })
}

/// `max_y p(y) / q(y)`: the supremum over events of `p(B) / q(B)`, which the
/// mediant inequality attains at a singleton. Zero-over-zero entries are skipped.
pub fn singleton_ratio(p: &[f64], q: &[f64]) -> f64 {
    let mut best: f64 = 0.0;
    for (&num, &den) in p.iter().zip(q) {
        if num > 0.0 {
            if den <= 0.0 {
                return f64::INFINITY;
            }
            best = best.max(num / den);
        }
    }
    best
}

/// The (ME) constant `K = sup_{x,x',u,B} P_u^m(x,B) / P_u^m(x',B)`.
pub fn me_constant(family: &KernelFamily, m: usize, budget: &SearchBudget) -> Result<MeCertificate> {
    check_m(m)?;
    let n = family.n();
    let mut k: f64 = 1.0;
    let exact;
    if m == 1 {
        // u(x) and u(x') are chosen independently for x ≠ x'
        exact = true;
        let mut hi = vec![vec![0.0f64; n]; n];
        let mut lo = vec![vec![f64::INFINITY; n]; n];
        for (x, _, row) in family.grid_rows() {
            for (y, &p) in row.iter().enumerate() {
                hi[x][y] = hi[x][y].max(p);
                lo[x][y] = lo[x][y].min(p);
            }
        }
        for (x, hx) in hi.iter().enumerate() {
            for x2 in (0..n).filter(|&x2| x2 != x) {
                k = k.max(singleton_ratio(hx, &lo[x2]));
            }
        }
    } else {
        let sweep = ControlSweep::new(family, budget);
        exact = sweep.exact();
        for u in sweep {
            let pm = k_step(&closed_loop(family, &u)?, m);
            for y in 0..n {
                let (lo, hi) = (0..n)
                    .map(|x| pm.get(x, y))
                    .fold((f64::INFINITY, 0.0f64), |(lo, hi), p| (lo.min(p), hi.max(p)));
                if hi > 0.0 {
                    k = k.max(if lo <= 0.0 { f64::INFINITY } else { hi / lo });
                }
            }
            if k.is_infinite() {
                break;
            }
        }
    }
    Ok(MeCertificate { k, m, exact, budget: budget.max_enumeration, seed: budget.seed })
}

/// Unique stationary distribution of `p`.
///
/// Uniqueness is decided on the support graph (exactly one closed class);
/// the balance equations with one row swapped for normalization are then
/// solved directly.
pub fn invariant_distribution(p: &StochasticMatrix) -> Result<Distribution> {
    let classes = closed_classes(p);
    if classes.len() != 1 {
        return Err(Error::NonUniqueStationary { classes: classes.len() });
    }
    let n = p.n();
    let a = DMatrix::from_fn(n, n, |i, j| {
        if i == n - 1 {
            1.0
        } else {
            p.get(j, i) - if i == j { 1.0 } else { 0.0 }
        }
    });
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let solution = solve(a, b)?;
    let mut pi: Vec<f64> = solution.iter().map(|&v| if v < 0.0 && v > -1e-12 { 0.0 } else { v }).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= total);
    let residual = stationarity_residual(p, &pi);
    if residual > STATIONARY_RESIDUAL_TOL || pi.iter().any(|&v| v < -1e-14) {
        return Err(Error::ToleranceViolation(format!("stationary residual {residual:.3e}")));
    }
    Ok(Distribution::from_vec_unchecked(pi))
}

/// `‖μP − μ‖∞`.
pub fn stationarity_residual(p: &StochasticMatrix, mu: &[f64]) -> f64 {
    p.push_forward(mu).iter().zip(mu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// `max_x TV(Pⁿ(x, ·), π)`.
pub fn doob_gap(p: &StochasticMatrix, pi: &Distribution, n: usize) -> f64 {
    let pn = k_step(p, n);
    pn.rows().map(|row| tv_distance(row, pi.probs())).fold(0.0, f64::max)
}

/// `doob_gap` for `n = 0..=n_max`, propagating rows instead of recomputing powers.
pub fn doob_gap_profile(p: &StochasticMatrix, pi: &Distribution, n_max: usize) -> Vec<f64> {
    let mut power = StochasticMatrix::identity(p.n());
    let mut out = Vec::with_capacity(n_max + 1);
    for step in 0..=n_max {
        if step > 0 {
            power = power.compose(p);
        }
        out.push(power.rows().map(|row| tv_distance(row, pi.probs())).fold(0.0, f64::max));
    }
    out
}

/// Entry `x` is `TV(P^{u1(x)}(x, ·), P^{u2(x)}(x, ·))`.
pub fn kernel_gap_profile(family: &KernelFamily, u1: &MarkovControl, u2: &MarkovControl) -> Result<Vec<f64>> {
    family.check_control(u1)?;
    family.check_control(u2)?;
    (0..family.n())
        .map(|x| Ok(tv_distance(&family.row(x, u1.values()[x])?, &family.row(x, u2.values()[x])?)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapWithBound {
    pub gap: f64,
    pub bound: f64,
}

impl GapWithBound {
    pub fn holds(&self, slack: f64) -> bool {
        self.gap <= self.bound + slack
    }
}

/// `max_x TV((P^{u1})^k(x,·), (P^{u2})^k(x,·))` against the coupling bound
/// `k · max_x TV(P^{u1(x)}(x,·), P^{u2(x)}(x,·))`.
pub fn k_step_control_gap(
    family: &KernelFamily,
    u1: &MarkovControl,
    u2: &MarkovControl,
    k: usize,
) -> Result<GapWithBound> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let profile = kernel_gap_profile(family, u1, u2)?;
    let p1 = k_step(&closed_loop(family, u1)?, k);
    let p2 = k_step(&closed_loop(family, u2)?, k);
    let gap = p1.rows().zip(p2.rows()).map(|(a, b)| tv_distance(a, b)).fold(0.0, f64::max);
    let bound = k as f64 * profile.iter().copied().fold(0.0, f64::max);
    if gap > bound + 1e-12 {
        return Err(Error::ToleranceViolation(format!("k-step gap {gap} exceeds coupling bound {bound}")));
    }
    Ok(GapWithBound { gap, bound })
}

/// `|μ1(f1) − μ2(f2)| ≤ osc(f1)·TV(μ1, μ2) + μ2(|f1 − f2|)`.
pub fn integral_tv_bound(mu1: &Distribution, mu2: &Distribution, f1: &[f64], f2: &[f64]) -> Result<GapWithBound> {
    let n = mu1.len();
    for len in [mu2.len(), f1.len(), f2.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, found: len });
        }
    }
    let gap = (mu1.integrate(f1) - mu2.integrate(f2)).abs();
    let osc = f1.iter().copied().fold(f64::NEG_INFINITY, f64::max) - f1.iter().copied().fold(f64::INFINITY, f64::min);
    let diff: Vec<f64> = f1.iter().zip(f2).map(|(a, b)| (a - b).abs()).collect();
    let bound = osc * tv_distance(mu1.probs(), mu2.probs()) + mu2.integrate(&diff);
    if gap > bound + 1e-12 {
        return Err(Error::ToleranceViolation(format!("integral gap {gap} exceeds bound {bound}")));
    }
    Ok(GapWithBound { gap, bound })
}

/// Bound on `TV(π¹, π²)` for two chains sharing a Doob rate `Δ`:
/// `min_k [ max_x TV(P₁ᵏ(x,·), P₂ᵏ(x,·)) + 2Δᵏ ]` over `k ≤ k_max`.
pub fn invariant_shift_bound(p1: &StochasticMatrix, p2: &StochasticMatrix, delta: f64, k_max: usize) -> f64 {
    let mut a = p1.clone();
    let mut b = p2.clone();
    let mut best = 1.0f64;
    for k in 1..=k_max {
        if k > 1 {
            a = a.compose(p1);
            b = b.compose(p2);
        }
        let gap = a.rows().zip(b.rows()).map(|(r, s)| tv_distance(r, s)).fold(0.0, f64::max);
        best = best.min(gap + 2.0 * delta.powi(k as i32));
    }
    best
}
