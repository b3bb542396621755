//! Return-time embedding for chains without one-step uniform ergodicity.
//!
//! Given state sets `R ⊆ R₁ ⊊ E`, the return time
//! `τ_R = D_{R₁ᶜ} + D_R ∘ θ_{D_{R₁ᶜ}}` first leaves `R₁` and then re-enters
//! `R`. It is encoded as an absorbing chain on `{phase 1, phase 2} × E`:
//! phase 1 follows `P` until the state lies outside `R₁`, where the phase
//! flips; phase 2 follows `P` until the state lies in `R`, where it is
//! absorbed. Moments of `τ_R`, the embedded kernel `Π(x, ·) = P_x(X_{τ_R} ∈ ·)`
//! and occupation measures over one excursion are all transient linear
//! systems of this chain.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chain::{closed_loop, tv_distance, Distribution, KernelFamily, MarkovControl, StochasticMatrix};
use crate::ergodicity::{doob_gap_profile, infinite_as_null, invariant_distribution, stationarity_residual};
use crate::error::{Error, Result};
use crate::linalg::{solve_on_subset, surely_reaches};
use crate::search::{ControlSweep, SearchBudget};

/// Tolerance for the ratio-formula reconstruction checks.
pub const RECONSTRUCTION_TOL: f64 = 1e-9;

/// The nested state sets `R ⊆ R₁`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallPair {
    r: Vec<usize>,
    r1: Vec<usize>,
    n: usize,
}

impl BallPair {
    pub fn new(mut r: Vec<usize>, mut r1: Vec<usize>, n: usize) -> Result<Self> {
        r.sort_unstable();
        r.dedup();
        r1.sort_unstable();
        r1.dedup();
        if r.is_empty() {
            return Err(Error::InvalidBalls("R must be nonempty".into()));
        }
        if let Some(&bad) = r.iter().chain(&r1).find(|&&x| x >= n) {
            return Err(Error::InvalidBalls(format!("state {bad} outside 0..{n}")));
        }
        if let Some(x) = r.iter().find(|x| r1.binary_search(x).is_err()) {
            return Err(Error::InvalidBalls(format!("state {x} in R but not in R1")));
        }
        if r1.len() == n {
            return Err(Error::InvalidBalls("complement of R1 must be nonempty".into()));
        }
        Ok(Self { r, r1, n })
    }

    pub fn r(&self) -> &[usize] {
        &self.r
    }

    pub fn r1(&self) -> &[usize] {
        &self.r1
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn in_r(&self, x: usize) -> bool {
        self.r.binary_search(&x).is_ok()
    }

    pub fn in_r1(&self, x: usize) -> bool {
        self.r1.binary_search(&x).is_ok()
    }
}

/// The absorbing chain on `{phase 1, phase 2} × E`.
///
/// Index `x` is `(phase 1, x)` and index `N + x` is `(phase 2, x)`; the
/// states `(phase 2, r)` for `r ∈ R` are absorbing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPhaseChain {
    pub matrix: StochasticMatrix,
    pub absorbing: Vec<bool>,
    balls: BallPair,
}

impl TwoPhaseChain {
    /// Index at which a chain started from `x` begins; states outside `R₁`
    /// have `D_{R₁ᶜ} = 0` and start in phase 2.
    pub fn start(&self, x: usize) -> usize {
        if self.balls.in_r1(x) {
            x
        } else {
            self.balls.n + x
        }
    }

    pub fn balls(&self) -> &BallPair {
        &self.balls
    }
}

pub fn build_two_phase(p: &StochasticMatrix, balls: &BallPair) -> Result<TwoPhaseChain> {
    let n = p.n();
    if balls.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: balls.n() });
    }
    let size = 2 * n;
    let mut data = vec![0.0; size * size];
    let mut absorbing = vec![false; size];
    for x in 0..n {
        let phase2 = n + x;
        if balls.in_r(x) {
            absorbing[phase2] = true;
            data[phase2 * size + phase2] = 1.0;
        } else {
            for (y, &pxy) in p.row(x).iter().enumerate() {
                data[phase2 * size + n + y] += pxy;
            }
        }
        // phase-1 copies of R₁ᶜ states are never entered; they mirror phase 2
        for (y, &pxy) in p.row(x).iter().enumerate() {
            let target = if balls.in_r1(x) && balls.in_r1(y) { y } else { n + y };
            data[x * size + target] += pxy;
        }
    }
    Ok(TwoPhaseChain {
        matrix: StochasticMatrix::from_flat_unchecked(size, data),
        absorbing,
        balls: balls.clone(),
    })
}

/// Excursion statistics from the phase-1 copies of the states in `R`.
struct Excursions {
    /// Expected visits to each two-phase state before absorption, per start in `R`.
    visits: Vec<Vec<f64>>,
    /// Absorption distribution over `R`, per start in `R`.
    landing: Vec<Vec<f64>>,
    mean: Vec<f64>,
    second: Vec<f64>,
}

fn excursions(chain: &TwoPhaseChain) -> Result<Excursions> {
    let balls = chain.balls();
    let n = balls.n();
    let size = 2 * n;
    let sure = surely_reaches(&chain.matrix, &chain.absorbing);
    for &x in balls.r() {
        if !sure[chain.start(x)] {
            return Err(Error::TransienceDetected(x));
        }
    }
    // transient states reachable from the starts; all of them absorb surely
    let mut reachable = vec![false; size];
    let mut stack: Vec<usize> = balls.r().iter().map(|&x| chain.start(x)).collect();
    for &s in &stack {
        reachable[s] = true;
    }
    while let Some(z) = stack.pop() {
        if chain.absorbing[z] {
            continue;
        }
        for w in chain.matrix.successors(z) {
            if !reachable[w] {
                reachable[w] = true;
                stack.push(w);
            }
        }
    }
    let free: Vec<usize> = (0..size).filter(|&i| reachable[i] && !chain.absorbing[i]).collect();
    let m = free.len();
    let q = DMatrix::from_fn(m, m, |i, j| chain.matrix.get(free[i], free[j]));
    let fundamental = (DMatrix::identity(m, m) - &q)
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("singular excursion system".into()))?;
    let ones = DVector::from_element(m, 1.0);
    let mean_all = &fundamental * &ones;
    let second_all = &fundamental * (&ones + 2.0 * (&q * &mean_all));

    let mut out = Excursions { visits: Vec::new(), landing: Vec::new(), mean: Vec::new(), second: Vec::new() };
    for &x in balls.r() {
        let i = free.iter().position(|&s| s == chain.start(x)).expect("start is transient");
        let mut visits = vec![0.0; size];
        for (j, &state) in free.iter().enumerate() {
            visits[state] = fundamental[(i, j)];
        }
        let landing = balls
            .r()
            .iter()
            .map(|&r| free.iter().map(|&t| visits[t] * chain.matrix.get(t, n + r)).sum())
            .collect();
        out.visits.push(visits);
        out.landing.push(landing);
        out.mean.push(mean_all[i]);
        out.second.push(second_all[i]);
    }
    Ok(out)
}

/// `Π(x, ·) = P_x(X_{τ_R} ∈ ·)` restricted to `R`, rows ordered as `balls.r()`.
pub fn embedded_kernel(p: &StochasticMatrix, balls: &BallPair) -> Result<StochasticMatrix> {
    let ex = excursions(&build_two_phase(p, balls)?)?;
    Ok(stochastic_from_landing(ex.landing))
}

fn stochastic_from_landing(rows: Vec<Vec<f64>>) -> StochasticMatrix {
    let k = rows.len();
    let mut data = Vec::with_capacity(k * k);
    for mut row in rows {
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v = (*v / total).max(0.0));
        data.extend(row);
    }
    StochasticMatrix::from_flat_unchecked(k, data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauMoments {
    /// `E_x τ_R` for `x` in `balls.r()` order.
    pub mean: Vec<f64>,
    /// `E_x τ_R²`.
    pub second: Vec<f64>,
}

/// First and second moments of `τ_R` from each `x ∈ R`, via
/// `h = 1 + Qh` and `s = 1 + 2Qh + Qs` on the transient states.
pub fn tau_moments(p: &StochasticMatrix, balls: &BallPair) -> Result<TauMoments> {
    let ex = excursions(&build_two_phase(p, balls)?)?;
    Ok(TauMoments { mean: ex.mean, second: ex.second })
}

/// Expected visits to each state at times `0, …, τ_R − 1` starting from `x ∈ R`.
pub fn occupation_before_return(p: &StochasticMatrix, balls: &BallPair, x: usize) -> Result<Vec<f64>> {
    let pos = balls
        .r()
        .iter()
        .position(|&r| r == x)
        .ok_or_else(|| Error::InvalidBalls(format!("start {x} is not in R")))?;
    let ex = excursions(&build_two_phase(p, balls)?)?;
    let n = balls.n();
    Ok((0..n).map(|y| ex.visits[pos][y] + ex.visits[pos][n + y]).collect())
}

/// `E_x Σ_{i<τ_R} f(X_i)` for `x ∈ R`.
pub fn excursion_sum(p: &StochasticMatrix, balls: &BallPair, x: usize, f: &[f64]) -> Result<f64> {
    Ok(crate::chain::dot(&occupation_before_return(p, balls, x)?, f))
}

/// `E_x D_R` for every state; `+∞` where `R` is not reached surely.
pub fn expected_hitting_times(p: &StochasticMatrix, target: &[bool]) -> Result<Vec<f64>> {
    let sure = surely_reaches(p, target);
    let free: Vec<usize> = (0..p.n()).filter(|&x| !target[x] && sure[x]).collect();
    let h = solve_on_subset(p, &free, &vec![1.0; free.len()])?;
    let mut out: Vec<f64> = (0..p.n()).map(|x| if sure[x] { 0.0 } else { f64::INFINITY }).collect();
    for (&x, &v) in free.iter().zip(&h) {
        out[x] = v;
    }
    Ok(out)
}

/// A supremum over Markov controls and the exhaustiveness of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSup {
    #[serde(with = "infinite_as_null")]
    pub value: f64,
    pub exact: bool,
}

fn sweep_sup(
    family: &KernelFamily,
    budget: &SearchBudget,
    mut eval: impl FnMut(&StochasticMatrix) -> Result<f64>,
) -> Result<SweepSup> {
    let sweep = ControlSweep::new(family, budget);
    let exact = sweep.exact();
    let mut value: f64 = 0.0;
    for u in sweep {
        value = value.max(eval(&closed_loop(family, &u)?)?);
        if value.is_infinite() {
            break;
        }
    }
    Ok(SweepSup { value, exact })
}

/// `Δ_R = sup_u max_{x,x' ∈ R} TV(Π^u(x,·), Π^u(x',·))`.
pub fn er_coefficient(family: &KernelFamily, balls: &BallPair, budget: &SearchBudget) -> Result<SweepSup> {
    sweep_sup(family, budget, |p| Ok(embedded_kernel(p, balls)?.contraction_coefficient()))
}

/// `sup_u sup_{x ∈ R} E_x τ_R²`.
pub fn ec_bound(family: &KernelFamily, balls: &BallPair, budget: &SearchBudget) -> Result<SweepSup> {
    sweep_sup(family, budget, |p| match tau_moments(p, balls) {
        Ok(t) => Ok(t.second.iter().copied().fold(0.0, f64::max)),
        Err(Error::TransienceDetected(_)) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    })
}

/// `sup_u sup_{x ∈ E} E_x D_R`; `+∞` on structural transience.
pub fn pr_bound(family: &KernelFamily, balls: &BallPair, budget: &SearchBudget) -> Result<SweepSup> {
    let target: Vec<bool> = (0..family.n()).map(|x| balls.in_r(x)).collect();
    sweep_sup(family, budget, |p| Ok(expected_hitting_times(p, &target)?.into_iter().fold(0.0, f64::max)))
}

/// Stationary distribution `μ` of the embedded kernel.
pub fn embedded_invariant(pi_kernel: &StochasticMatrix) -> Result<Distribution> {
    invariant_distribution(pi_kernel)
}

/// Largest violation of `max_x TV(Πⁿ(x,·), μ) ≤ Δ_Rⁿ` over `n = 1..=n_max`.
pub fn embedded_doob_excess(pi_kernel: &StochasticMatrix, mu: &Distribution, delta_r: f64, n_max: usize) -> f64 {
    doob_gap_profile(pi_kernel, mu, n_max)
        .iter()
        .enumerate()
        .skip(1)
        .map(|(n, g)| g - delta_r.powi(n as i32))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedResult {
    pub r: Vec<usize>,
    pub r1: Vec<usize>,
    /// Embedded kernel `Π`, rows and columns ordered as `r`.
    pub pi_kernel: Vec<Vec<f64>>,
    pub delta_r: f64,
    pub tau_mean: Vec<f64>,
    pub tau_second: Vec<f64>,
    #[serde(with = "infinite_as_null")]
    pub pr_sup: f64,
    pub mu: Distribution,
    pub pi: Distribution,
    pub residual: f64,
    /// TV distance to the directly solved invariant distribution, when it exists.
    pub direct_tv: Option<f64>,
}

/// Invariant distribution through the ratio formula
/// `π(y) = Σ_{x∈R} μ(x) occ_x(y) / Σ_{x∈R} μ(x) E_x τ_R`.
pub fn reconstruct_invariant(family: &KernelFamily, u: &MarkovControl, balls: &BallPair) -> Result<EmbeddedResult> {
    let p = closed_loop(family, u)?;
    reconstruct_from_kernel(&p, balls)
}

/// [`reconstruct_invariant`] for an explicit closed-loop kernel.
pub fn reconstruct_from_kernel(p: &StochasticMatrix, balls: &BallPair) -> Result<EmbeddedResult> {
    let chain = build_two_phase(p, balls)?;
    let ex = excursions(&chain)?;
    let n = balls.n();
    let pi_kernel = stochastic_from_landing(ex.landing.clone());
    let delta_r = pi_kernel.contraction_coefficient();
    let mu = embedded_invariant(&pi_kernel)?;

    let mut numer = vec![0.0; n];
    let mut denom = 0.0;
    for (i, &m) in mu.probs().iter().enumerate() {
        for (y, v) in numer.iter_mut().enumerate() {
            *v += m * (ex.visits[i][y] + ex.visits[i][n + y]);
        }
        denom += m * ex.mean[i];
    }
    let pi: Vec<f64> = numer.iter().map(|v| v / denom).collect();
    let residual = stationarity_residual(p, &pi);
    if residual > RECONSTRUCTION_TOL {
        return Err(Error::ToleranceViolation(format!("reconstructed pi residual {residual:.3e}")));
    }
    let direct_tv = match invariant_distribution(p) {
        Ok(direct) => Some(tv_distance(direct.probs(), &pi)),
        Err(Error::NonUniqueStationary { .. }) => None,
        Err(e) => return Err(e),
    };
    if let Some(tv) = direct_tv {
        if tv > RECONSTRUCTION_TOL {
            return Err(Error::ToleranceViolation(format!("reconstructed pi differs from direct solve by {tv:.3e}")));
        }
    }
    let target: Vec<bool> = (0..n).map(|x| balls.in_r(x)).collect();
    let pr_sup = expected_hitting_times(p, &target)?.into_iter().fold(0.0, f64::max);
    Ok(EmbeddedResult {
        r: balls.r().to_vec(),
        r1: balls.r1().to_vec(),
        pi_kernel: pi_kernel.to_rows(),
        delta_r,
        tau_mean: ex.mean,
        tau_second: ex.second,
        pr_sup,
        mu,
        pi: Distribution::from_vec_unchecked(pi),
        residual,
        direct_tv,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub horizon: usize,
    /// Exact `P_x(τ_R ≥ N)`.
    pub tail: f64,
    /// Markov bound `E_x τ_R / N`.
    pub markov_bound: f64,
}

/// Tail probabilities of `τ_R` from `x ∈ R` next to their Markov bounds.
pub fn truncation_diagnostics(
    p: &StochasticMatrix,
    balls: &BallPair,
    x: usize,
    horizons: &[usize],
) -> Result<Vec<TruncationRow>> {
    let chain = build_two_phase(p, balls)?;
    let pos = balls
        .r()
        .iter()
        .position(|&r| r == x)
        .ok_or_else(|| Error::InvalidBalls(format!("start {x} is not in R")))?;
    let mean = excursions(&chain)?.mean[pos];
    let size = chain.matrix.n();
    let mut mass = vec![0.0; size];
    mass[chain.start(x)] = 1.0;
    let max_h = horizons.iter().copied().max().unwrap_or(0);
    // tail[t] = P(τ ≥ t) = transient mass after t − 1 steps... after t steps minus nothing:
    // τ ≥ t iff the chain is still transient at time t − 1
    let mut tails = Vec::with_capacity(max_h + 1);
    tails.push(1.0);
    for _ in 0..max_h {
        let alive: f64 = mass.iter().zip(&chain.absorbing).filter(|(_, &a)| !a).map(|(m, _)| m).sum();
        tails.push(alive);
        for (m, &a) in mass.iter_mut().zip(&chain.absorbing) {
            if a {
                *m = 0.0;
            }
        }
        mass = chain.matrix.push_forward(&mass);
    }
    Ok(horizons
        .iter()
        .map(|&h| TruncationRow {
            horizon: h,
            tail: tails[h],
            markov_bound: if h == 0 { f64::INFINITY } else { mean / h as f64 },
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(rows: Vec<Vec<f64>>) -> StochasticMatrix {
        StochasticMatrix::from_rows(rows).unwrap()
    }

    fn cycle() -> StochasticMatrix {
        m(vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]])
    }

    fn flip() -> StochasticMatrix {
        m(vec![vec![0.0, 1.0], vec![1.0, 0.0]])
    }

    #[test]
    fn ball_validation() {
        assert!(BallPair::new(vec![], vec![0], 3).is_err());
        assert!(BallPair::new(vec![0, 1], vec![0], 3).is_err());
        assert!(BallPair::new(vec![0], vec![0, 1, 2], 3).is_err());
        assert!(BallPair::new(vec![5], vec![5], 3).is_err());
        assert!(BallPair::new(vec![0], vec![0, 1], 3).is_ok());
    }

    #[test]
    fn two_phase_structure() {
        let p = m(vec![vec![0.2, 0.3, 0.5], vec![0.4, 0.4, 0.2], vec![0.3, 0.3, 0.4]]);
        let balls = BallPair::new(vec![0], vec![0, 1], 3).unwrap();
        let chain = build_two_phase(&p, &balls).unwrap();
        // only (phase 2, 0) absorbs
        assert_eq!(chain.absorbing, vec![false, false, false, true, false, false]);
        assert_eq!(chain.start(2), 5);
        assert_eq!(chain.start(1), 1);
        // R = R1: a state outside R1 starts in phase 2
        let same = BallPair::new(vec![0, 1], vec![0, 1], 3).unwrap();
        assert_eq!(build_two_phase(&p, &same).unwrap().start(2), 5);
    }

    #[test]
    fn deterministic_cycle() {
        let balls = BallPair::new(vec![0], vec![0, 1], 3).unwrap();
        let t = tau_moments(&cycle(), &balls).unwrap();
        assert_abs_diff_eq!(t.mean[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.second[0], 9.0, epsilon = 1e-12);
        let pi_kernel = embedded_kernel(&cycle(), &balls).unwrap();
        assert_abs_diff_eq!(pi_kernel.get(0, 0), 1.0, epsilon = 1e-12);
        let occ = occupation_before_return(&cycle(), &balls, 0).unwrap();
        for v in occ {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        }
        let res = reconstruct_from_kernel(&cycle(), &balls).unwrap();
        for v in res.pi.probs() {
            assert_abs_diff_eq!(*v, 1.0 / 3.0, epsilon = 1e-12);
        }
        let target = [true, false, false];
        let h = expected_hitting_times(&cycle(), &target).unwrap();
        assert_eq!(h, vec![0.0, 2.0, 1.0]);
    }

    #[test]
    fn flip_chain_singleton_ball() {
        let balls = BallPair::new(vec![0], vec![0], 2).unwrap();
        let t = tau_moments(&flip(), &balls).unwrap();
        assert_abs_diff_eq!(t.mean[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.second[0], 4.0, epsilon = 1e-12);
        let occ = occupation_before_return(&flip(), &balls, 0).unwrap();
        assert_abs_diff_eq!(occ[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(occ[1], 1.0, epsilon = 1e-12);
        let res = reconstruct_from_kernel(&flip(), &balls).unwrap();
        assert_abs_diff_eq!(res.pi.probs()[0], 0.5, epsilon = 1e-12);
        assert_eq!(res.mu.probs(), &[1.0]);
    }

    #[test]
    fn three_state_embedded_kernel() {
        let p = m(vec![vec![0.1, 0.6, 0.3], vec![0.2, 0.5, 0.3], vec![0.4, 0.4, 0.2]]);
        let balls = BallPair::new(vec![0, 1], vec![0, 1], 3).unwrap();
        let pi_kernel = embedded_kernel(&p, &balls).unwrap();
        // every excursion leaves through state 2, which lands on 0 or 1 with
        // probabilities 0.4/0.8 and 0.4/0.8
        for x in 0..2 {
            assert_abs_diff_eq!(pi_kernel.get(x, 0), 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(pi_kernel.get(x, 1), 0.5, epsilon = 1e-12);
        }
        let mu = embedded_invariant(&pi_kernel).unwrap();
        assert_abs_diff_eq!(mu.probs()[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn singleton_r_has_trivial_embedded_kernel() {
        let p = m(vec![vec![0.2, 0.3, 0.5], vec![0.4, 0.4, 0.2], vec![0.3, 0.3, 0.4]]);
        let balls = BallPair::new(vec![1], vec![1, 2], 3).unwrap();
        let k = embedded_kernel(&p, &balls).unwrap();
        assert_eq!(k.to_rows(), vec![vec![1.0]]);
        assert_eq!(k.contraction_coefficient(), 0.0);
        assert_eq!(embedded_invariant(&k).unwrap().probs(), &[1.0]);
    }

    #[test]
    fn embedded_invariant_cases() {
        let half = m(vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert_abs_diff_eq!(embedded_invariant(&half).unwrap().probs()[1], 0.5, epsilon = 1e-15);
        let k = m(vec![vec![0.7, 0.3], vec![0.2, 0.8]]);
        let mu = embedded_invariant(&k).unwrap();
        assert_abs_diff_eq!(mu.probs()[0], 0.4, epsilon = 1e-14);
        assert!(embedded_doob_excess(&k, &mu, 0.5, 30) <= 1e-15);
    }

    #[test]
    fn transience_is_detected() {
        // state 2 is absorbing outside R
        let p = m(vec![vec![0.5, 0.0, 0.5], vec![0.5, 0.5, 0.0], vec![0.0, 0.0, 1.0]]);
        let balls = BallPair::new(vec![0], vec![0, 1], 3).unwrap();
        assert_eq!(tau_moments(&p, &balls).unwrap_err(), Error::TransienceDetected(0));
        let h = expected_hitting_times(&p, &[true, false, false]).unwrap();
        assert!(h[2].is_infinite());
    }

    #[test]
    fn truncation_tail_of_cycle() {
        let balls = BallPair::new(vec![0], vec![0, 1], 3).unwrap();
        let rows = truncation_diagnostics(&cycle(), &balls, 0, &[1, 3, 4]).unwrap();
        assert_eq!(rows[0].tail, 1.0);
        assert_eq!(rows[1].tail, 1.0);
        assert_eq!(rows[2].tail, 0.0);
        assert_abs_diff_eq!(rows[2].markov_bound, 0.75);
    }

    #[test]
    fn excursion_sum_matches_mean_for_unit_cost() {
        let p = m(vec![vec![0.2, 0.3, 0.5], vec![0.4, 0.4, 0.2], vec![0.3, 0.3, 0.4]]);
        let balls = BallPair::new(vec![0, 1], vec![0, 1], 3).unwrap();
        let t = tau_moments(&p, &balls).unwrap();
        for (i, &x) in balls.r().iter().enumerate() {
            assert_abs_diff_eq!(excursion_sum(&p, &balls, x, &[1.0; 3]).unwrap(), t.mean[i], epsilon = 1e-12);
            assert!(t.second[i] >= t.mean[i] * t.mean[i] - 1e-12);
        }
    }
}
