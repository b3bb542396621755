//! Small-risk asymptotics: the risk-sensitive rate approaches the average
//! cost as `α → 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::average_cost::{cesaro_mean, stationary_average};
use crate::chain::{closed_loop, CostFunction, Distribution, KernelFamily, MarkovControl};
use crate::ergodicity::{invariant_distribution, kernel_gap_profile, GapWithBound};
use crate::error::{Error, Result};
use crate::risk::{log_moments, solve_risk_poisson, span_seminorm, RiskFactor, SetRateGap, SolverOptions};
use crate::search::{indicator, subsets, SearchBudget};

const HOEFFDING_SLACK: f64 = 1e-12;
const DECOMPOSITION_SLACK: f64 = 1e-10;

/// `ln E e^{αX} − α E X` for `X` distributed as `dist` on `values`, with the
/// bound `(max v − min v)² α² / 8`.
pub fn hoeffding_gap(dist: &Distribution, values: &[f64], alpha: f64) -> Result<GapWithBound> {
    if values.len() != dist.len() {
        return Err(Error::DimensionMismatch { expected: dist.len(), found: values.len() });
    }
    if !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha {alpha} must be finite")));
    }
    let support: Vec<(f64, f64)> =
        dist.probs().iter().zip(values).filter(|(&p, _)| p > 0.0).map(|(&p, &v)| (p, v)).collect();
    let mean: f64 = support.iter().map(|(p, v)| p * v).sum();
    let (lo, hi) = support
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, v)| (lo.min(v), hi.max(v)));
    let bound = (hi - lo).powi(2) * alpha * alpha / 8.0;
    // centred exponents keep the result accurate when the gap is tiny
    let t_max = support.iter().map(|&(_, v)| alpha * (v - mean)).fold(f64::NEG_INFINITY, f64::max);
    let gap = if t_max <= 1.0 {
        support.iter().map(|&(p, v)| p * (alpha * (v - mean)).exp_m1()).sum::<f64>().ln_1p()
    } else {
        t_max + support.iter().map(|&(p, v)| p * (alpha * (v - mean) - t_max).exp()).sum::<f64>().ln()
    };
    if gap < -HOEFFDING_SLACK || gap > bound + HOEFFDING_SLACK {
        return Err(Error::ToleranceViolation(format!("Hoeffding gap {gap} outside [0, {bound}]")));
    }
    Ok(GapWithBound { gap, bound })
}

/// `max_B |λ^{u,α}(1_B) − π^u(B)|` over state subsets.
pub fn small_risk_set_gap(
    family: &KernelFamily,
    u: &MarkovControl,
    alpha: RiskFactor,
    budget: &SearchBudget,
) -> Result<SetRateGap> {
    let p = closed_loop(family, u)?;
    let pi = invariant_distribution(&p)?;
    let (sets, exact) = subsets(family.n(), budget);
    let opts = SolverOptions::default();
    let gaps: Vec<f64> = sets
        .par_iter()
        .map(|mask| {
            let f = indicator(mask);
            let lambda = solve_risk_poisson(&p, &f, alpha, &opts)?.lambda;
            Ok((lambda - pi.integrate(&f)).abs())
        })
        .collect::<Result<_>>()?;
    let (best, gap) = gaps
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(bi, bg), (i, &g)| if g > bg { (i, g) } else { (bi, bg) });
    Ok(SetRateGap { gap, worst_set: sets[best].clone(), exact })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermBounds {
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub e: f64,
}

/// Split of `|λ − π(f)|` into four pieces over a horizon `n`:
///
/// * `a = |λ − (1/αn) ln E e^{α(S_n + w(X_n))}|`
/// * `b = |(1/αn)(ln E e^{α(S_n + w(X_n))} − ln E e^{α S_n})|`
/// * `d = |(1/αn) ln E e^{α S_n} − (1/n) E S_n|`
/// * `e = |(1/n) E S_n − π(f)|`
///
/// where `S_n = Σ_{i<n} f(X_i)` and `X_0` is the anchor state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionTerms {
    pub n: usize,
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub e: f64,
    pub bounds: TermBounds,
    /// True when `f` was mapped affinely onto `[0, 1]` first.
    pub rescaled: bool,
}

impl DecompositionTerms {
    pub fn holds(&self, slack: f64) -> bool {
        self.a <= self.bounds.a + slack
            && self.b <= self.bounds.b + slack
            && self.d <= self.bounds.d + slack
            && self.e <= self.bounds.e + slack
    }
}

fn unit_interval(f: &[f64]) -> (Vec<f64>, bool) {
    let lo = f.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo >= 0.0 && hi <= 1.0 {
        return (f.to_vec(), false);
    }
    let range = hi - lo;
    let g = f.iter().map(|&v| if range > 0.0 { (v - lo) / range } else { 0.0 }).collect();
    (g, true)
}

/// Evaluates [`DecompositionTerms`] exactly and checks each term against its
/// bound; `delta` is a certified Doob rate for the closed loop.
pub fn decomposition_terms(
    family: &KernelFamily,
    u: &MarkovControl,
    f: &[f64],
    alpha: RiskFactor,
    n: usize,
    delta: f64,
) -> Result<DecompositionTerms> {
    if n == 0 {
        return Err(Error::InvalidArgument("horizon n must be positive".into()));
    }
    let p = closed_loop(family, u)?;
    if f.len() != p.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), found: f.len() });
    }
    let (f, rescaled) = unit_interval(f);
    let x = 0;
    let sol = solve_risk_poisson(&p, &f, alpha, &SolverOptions::default())?;
    let pi = invariant_distribution(&p)?;
    let an = alpha.value() * n as f64;
    let with_w = log_moments(&p, &f, alpha.value(), n, Some(&sol.w))[x];
    let plain = log_moments(&p, &f, alpha.value(), n, None)[x];
    let mean = cesaro_mean(&p, &f, x, n)?;
    let nf = n as f64;
    let span_w = sol.span();
    let osc = span_seminorm(&f);
    let terms = DecompositionTerms {
        n,
        alpha: alpha.value(),
        a: (sol.lambda - with_w / an).abs(),
        b: ((with_w - plain) / an).abs(),
        d: (plain / an - mean).abs(),
        e: (mean - pi.integrate(&f)).abs(),
        bounds: TermBounds {
            a: span_w / nf,
            b: span_w / nf,
            d: nf * alpha.value().abs() * osc * osc / 8.0,
            e: if delta < 1.0 { osc / (nf * (1.0 - delta)) } else { f64::INFINITY },
        },
        rescaled,
    };
    if !terms.holds(DECOMPOSITION_SLACK) {
        return Err(Error::ToleranceViolation(format!("decomposition term exceeds its bound: {terms:?}")));
    }
    Ok(terms)
}

/// `min_{n ≥ 1} [2 span(w)/n + n|α| osc²/8 + osc/(n(1 − Δ))]`: the summed
/// decomposition bounds on `|λ − π(f)|` optimized over the horizon.
pub fn small_risk_bound(span_w: f64, osc: f64, alpha: f64, delta: f64) -> f64 {
    if osc == 0.0 {
        return 0.0;
    }
    if delta >= 1.0 {
        return f64::INFINITY;
    }
    let c = 2.0 * span_w + osc / (1.0 - delta);
    let s = alpha.abs() * osc * osc / 8.0;
    let total = |n: f64| c / n + n * s;
    let star = (c / s).sqrt().max(1.0);
    if !star.is_finite() {
        return 0.0;
    }
    total(star.floor().max(1.0)).min(total(star.ceil()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimitRow {
    pub n: usize,
    pub alpha: f64,
    /// `(1/α_n) I^{α_n}(u_n)`.
    pub value: f64,
    /// `J(u)`.
    pub reference: f64,
    pub gap: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// One cell of a joint sequence `(n, α_n, u_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointCell {
    pub n: usize,
    pub alpha: RiskFactor,
    pub control: MarkovControl,
}

/// `|(1/α_n) I^{α_n}(u_n) − J(u)|` along a joint sequence, each against
/// `tol(n) = max(10 α_n, 10 max_x TV(P^{u_n(x)}(x,·), P^{u(x)}(x,·)))`.
pub fn joint_limit_trace(
    family: &KernelFamily,
    target: &MarkovControl,
    cells: &[JointCell],
    cost: &CostFunction,
) -> Result<Vec<JointLimitRow>> {
    let reference = stationary_average(family, target, cost)?.value;
    cells
        .par_iter()
        .map(|cell| {
            let p = closed_loop(family, &cell.control)?;
            let cu = cost.closed_loop(&cell.control)?;
            let value = solve_risk_poisson(&p, &cu, cell.alpha, &SolverOptions::default())?.lambda;
            let profile = kernel_gap_profile(family, &cell.control, target)?;
            let kernel_gap = profile.into_iter().fold(0.0, f64::max);
            let tolerance = (10.0 * cell.alpha.value().abs()).max(10.0 * kernel_gap);
            let gap = (value - reference).abs();
            Ok(JointLimitRow {
                n: cell.n,
                alpha: cell.alpha.value(),
                value,
                reference,
                gap,
                tolerance,
                pass: gap <= tolerance,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::ControlSet;
    use approx::assert_abs_diff_eq;

    fn rank_one(mu: Vec<f64>) -> KernelFamily {
        let rows = vec![mu; 3];
        KernelFamily::mixture(ControlSet::grid(0.5).unwrap(), rows.clone(), rows).unwrap()
    }

    fn two_state() -> KernelFamily {
        KernelFamily::mixture(
            ControlSet::grid(0.5).unwrap(),
            vec![vec![0.7, 0.3], vec![0.2, 0.8]],
            vec![vec![0.4, 0.6], vec![0.5, 0.5]],
        )
        .unwrap()
    }

    #[test]
    fn hoeffding_examples() {
        let d = Distribution::new(vec![0.5, 0.5]).unwrap();
        let r = hoeffding_gap(&d, &[0.0, 1.0], 1.0).unwrap();
        assert_abs_diff_eq!(r.gap, ((1.0 + 1f64.exp()) / 2.0).ln() - 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.bound, 0.125);
        assert_eq!(hoeffding_gap(&d, &[0.0, 1.0], 0.0).unwrap().gap, 0.0);
        assert_eq!(hoeffding_gap(&d, &[3.0, 3.0], 7.0).unwrap().gap, 0.0);
        let r = hoeffding_gap(&d, &[0.0, 1.0], -20.0).unwrap();
        assert!(r.gap > 0.0 && r.gap <= r.bound);
    }

    #[test]
    fn rank_one_set_gap_closed_form() {
        let mu = vec![0.2, 0.3, 0.5];
        let fam = rank_one(mu.clone());
        let u = MarkovControl::constant(3, 0.0);
        let alpha = 0.3;
        let r = small_risk_set_gap(&fam, &u, RiskFactor::new(alpha).unwrap(), &SearchBudget::default()).unwrap();
        assert!(r.exact);
        let mut best = 0.0f64;
        for mask in 0u32..8 {
            let m: f64 = (0..3).filter(|y| mask >> y & 1 == 1).map(|y| mu[y]).sum();
            let closed = ((m * alpha.exp() + 1.0 - m).ln() / alpha - m).abs();
            assert!(closed <= alpha / 8.0 + 1e-15);
            best = best.max(closed);
        }
        assert_abs_diff_eq!(r.gap, best, epsilon = 1e-11);
        assert!(!r.worst_set.iter().all(|&b| b) && r.worst_set.iter().any(|&b| b));
    }

    #[test]
    fn constant_cost_has_zero_terms() {
        let fam = two_state();
        let u = MarkovControl::new(vec![0.5, 0.0]);
        let t = decomposition_terms(&fam, &u, &[0.4, 0.4], RiskFactor::new(0.1).unwrap(), 50, 0.9).unwrap();
        for v in [t.a, t.b, t.d, t.e] {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
        }
        assert!(!t.rescaled);
    }

    #[test]
    fn rank_one_mixing_term() {
        let mu = vec![0.2, 0.3, 0.5];
        let fam = rank_one(mu.clone());
        let f = [0.0, 1.0, 0.25];
        let u = MarkovControl::constant(3, 1.0);
        let n = 20;
        let t = decomposition_terms(&fam, &u, &f, RiskFactor::new(-0.5).unwrap(), n, 0.0).unwrap();
        let pi_f: f64 = mu.iter().zip(&f).map(|(m, v)| m * v).sum();
        assert_abs_diff_eq!(t.e, (f[0] - pi_f).abs() / n as f64, epsilon = 1e-14);
    }

    #[test]
    fn out_of_range_cost_is_rescaled() {
        let fam = two_state();
        let u = MarkovControl::new(vec![0.0, 1.0]);
        let t = decomposition_terms(&fam, &u, &[-2.0, 3.0], RiskFactor::new(0.05).unwrap(), 200, 0.5).unwrap();
        assert!(t.rescaled);
        assert!(t.holds(0.0));
    }

    #[test]
    fn small_risk_bound_optimizes_horizon() {
        let direct = (1..10_000)
            .map(|n| 2.0 * 0.7 / n as f64 + n as f64 * 0.01 / 8.0 + 1.0 / (n as f64 * 0.5))
            .fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(small_risk_bound(0.7, 1.0, 0.01, 0.5), direct, epsilon = 1e-15);
        assert_eq!(small_risk_bound(0.3, 0.0, 0.1, 0.5), 0.0);
        assert!(small_risk_bound(0.3, 1.0, 0.1, 1.0).is_infinite());
    }

    #[test]
    fn joint_trace_with_constant_cost() {
        let fam = two_state();
        let u = MarkovControl::new(vec![0.5, 0.5]);
        let cost = CostFunction::constant(2, 0.7).unwrap();
        let cells: Vec<JointCell> = (1..=5)
            .map(|n| JointCell {
                n,
                alpha: RiskFactor::new(0.5f64.powi(n as i32)).unwrap(),
                control: MarkovControl::new(vec![0.5, 0.5 + 0.5f64.powi(n as i32 + 1)]),
            })
            .collect();
        let rows = joint_limit_trace(&fam, &u, &cells, &cost).unwrap();
        assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
        for r in rows {
            assert_abs_diff_eq!(r.gap, 0.0, epsilon = 1e-12);
            assert!(r.pass);
        }
    }

    #[test]
    fn fixed_control_corridor() {
        let fam = two_state();
        let u = MarkovControl::new(vec![0.5, 0.5]);
        let cost = CostFunction::state_only(vec![0.0, 1.0]).unwrap();
        let cells: Vec<JointCell> = (1..=10)
            .map(|n| JointCell { n, alpha: RiskFactor::new(0.5f64.powi(n as i32)).unwrap(), control: u.clone() })
            .collect();
        let rows = joint_limit_trace(&fam, &u, &cells, &cost).unwrap();
        for pair in rows.windows(2) {
            assert!(pair[1].gap < pair[0].gap);
        }
        // the gap is first order in α
        let last = rows.last().unwrap();
        assert!(last.gap / last.alpha < 1.0);
    }
}
