//! Convergence experiments for control sequences `u_n → u`.
//!
//! | problem | monitored gap                              | bound column                          |
//! |---------|--------------------------------------------|---------------------------------------|
//! | 1       | `TV(π^{u_n}, π^u)`                         | `min_k [k-step gap + 2Δᵏ]`            |
//! | 2       | `|J(u_n) − J(u)|`                          | oscillation × TV + cost difference    |
//! | 3       | `max_B |λ^{u_n,α}(B) − λ^{u,α}(B)|`        | log-moment proximity at horizon `k`   |
//! | 4       | `|I^α(u_n) − I^α(u)|`                      | `|α|` × log-moment proximity          |
//! | 5       | `max_B |λ^{u,α}(B) − π^u(B)|` along `α`    | optimized decomposition bound         |
//! | 6       | `|(1/α_n) I^{α_n}(u_n) − J(u)|`            | decomposition bound + problem-2 bound |
//!
//! A row passes when its gap is within the bound; the last row of each
//! problem must also fall below [`FINAL_TOLERANCE`], and problem 6 rows must
//! meet the joint tolerance `max(10 α_n, 10 max kernel gap)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{joint_limit_trace, small_risk_bound, small_risk_set_gap, JointCell};
use crate::average_cost::stationary_average;
use crate::chain::{closed_loop, tv_distance, Distribution, MarkovControl, StochasticMatrix};
use crate::ergodicity::{integral_tv_bound, invariant_distribution, invariant_shift_bound};
use crate::error::{Error, Result};
use crate::experiments::certify::{certify, CertificateReport};
use crate::experiments::sequence::{generate_sequence, ControlSequenceRule};
use crate::model::Model;
use crate::risk::{rate_proximity, set_rate_gap, solve_risk_poisson, span_seminorm, RiskFactor, SolverOptions};
use crate::search::{indicator, SearchBudget};

pub const FINAL_TOLERANCE: f64 = 1e-3;
const BOUND_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceChoice {
    GridRound,
    Explicit(Vec<MarkovControl>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// `canonical` or a model file path.
    pub model: String,
    pub problems: Vec<u8>,
    pub sequence: SequenceChoice,
    /// Largest sequence index for grid rounding.
    pub max_index: usize,
    /// Risk factors for problems 3 to 5; `None` selects the defaults.
    pub alpha_grid: Option<Vec<f64>>,
    /// Horizon of the log-moment proximity bound.
    pub horizon_k: usize,
    /// Largest power tried in the invariant-shift bound.
    pub shift_k_max: usize,
    pub budget: SearchBudget,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: crate::model::CANONICAL.into(),
            problems: (1..=6).collect(),
            sequence: SequenceChoice::GridRound,
            max_index: 12,
            alpha_grid: None,
            horizon_k: 1000,
            shift_k_max: 200,
            budget: SearchBudget::default(),
        }
    }
}

/// Risk factors for problems 3 and 4.
pub const DEFAULT_RATE_ALPHAS: [f64; 2] = [0.5, -0.5];

/// `2⁻ʲ` for `j = 0..=12`.
pub fn default_small_alphas() -> Vec<f64> {
    (0..=12).map(|j| 0.5f64.powi(j)).collect()
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.problems.is_empty() {
            return Err(Error::InvalidArgument("no problems selected".into()));
        }
        if let Some(p) = self.problems.iter().find(|p| !(1..=6).contains(*p)) {
            return Err(Error::InvalidArgument(format!("problem {p} is not in 1..=6")));
        }
        if self.max_index == 0 || self.horizon_k == 0 || self.shift_k_max == 0 {
            return Err(Error::InvalidArgument("indices and horizons must be positive".into()));
        }
        if self.budget.max_enumeration == 0 || self.budget.samples == 0 {
            return Err(Error::InvalidArgument("budgets must be positive".into()));
        }
        if let Some(grid) = &self.alpha_grid {
            if grid.is_empty() {
                return Err(Error::InvalidArgument("empty alpha grid".into()));
            }
            for &a in grid {
                RiskFactor::new(a)?;
            }
        }
        Ok(())
    }

    fn rate_alphas(&self) -> Vec<f64> {
        self.alpha_grid.clone().unwrap_or_else(|| DEFAULT_RATE_ALPHAS.to_vec())
    }

    fn small_alphas(&self) -> Vec<f64> {
        self.alpha_grid.clone().unwrap_or_else(default_small_alphas)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub problem: u8,
    pub n: usize,
    pub alpha: Option<f64>,
    pub quantity: String,
    /// The limiting quantity under the target control.
    pub reference: f64,
    pub gap: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub model: String,
    pub certificates: CertificateReport,
    pub rows: Vec<SuiteRow>,
}

impl SuiteReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Shared per-run state: target chain and references computed once.
struct Context<'a> {
    model: &'a Model,
    config: &'a ExperimentConfig,
    certificates: &'a CertificateReport,
    rule: ControlSequenceRule,
    p: StochasticMatrix,
    pi: Distribution,
    cost_u: Vec<f64>,
    j: f64,
}

struct SequenceCell {
    n: usize,
    control: MarkovControl,
    p: StochasticMatrix,
    pi: Distribution,
    cost: Vec<f64>,
}

fn in_cell<T>(problem: u8, n: usize, alpha: Option<f64>, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Cell { problem, n, alpha, source: Box::new(e) })
}

impl<'a> Context<'a> {
    fn new(model: &'a Model, config: &'a ExperimentConfig, certificates: &'a CertificateReport) -> Result<Self> {
        let rule = config.sequence.rule(model.target.clone())?;
        let p = closed_loop(&model.family, &model.target)?;
        let pi = invariant_distribution(&p)?;
        let cost_u = model.cost.closed_loop(&model.target)?;
        let j = stationary_average(&model.family, &model.target, &model.cost)?.value;
        Ok(Self { model, config, certificates, rule, p, pi, cost_u, j })
    }

    fn delta(&self) -> f64 {
        self.certificates.ue.delta
    }

    fn cells(&self, problem: u8) -> Result<Vec<SequenceCell>> {
        self.rule
            .indices(self.config.max_index)
            .into_par_iter()
            .map(|n| {
                in_cell(problem, n, None, (|| {
                    let control = generate_sequence(&self.rule, n)?;
                    let p = closed_loop(&self.model.family, &control)?;
                    let pi = invariant_distribution(&p)?;
                    let cost = self.model.cost.closed_loop(&control)?;
                    Ok(SequenceCell { n, control, p, pi, cost })
                })())
            })
            .collect()
    }

    /// Bound on `TV(π_n, π)` from the certified rate, or from exact Doob
    /// gaps of both chains when only the embedded route is certified.
    fn shift_bound(&self, cell: &SequenceCell) -> f64 {
        if self.certificates.ue_holds() {
            return invariant_shift_bound(&cell.p, &self.p, self.delta(), self.config.shift_k_max);
        }
        let mut a = cell.p.clone();
        let mut b = self.p.clone();
        let mut best = 1.0f64;
        for k in 1..=self.config.shift_k_max {
            if k > 1 {
                a = a.compose(&cell.p);
                b = b.compose(&self.p);
            }
            let gap = a.rows().zip(b.rows()).map(|(r, s)| tv_distance(r, s)).fold(0.0, f64::max);
            best = best.min(gap + exact_doob(&a, &cell.pi) + exact_doob(&b, &self.pi));
        }
        best
    }

    fn problem1(&self) -> Result<Vec<SuiteRow>> {
        Ok(self
            .cells(1)?
            .iter()
            .map(|c| {
                let gap = tv_distance(c.pi.probs(), self.pi.probs());
                let worst: Vec<usize> = (0..self.pi.len()).filter(|&y| c.pi.probs()[y] > self.pi.probs()[y]).collect();
                let bound = self.shift_bound(c);
                row(1, c.n, None, "tv_invariant", self.pi.measure_of(&worst), gap, bound)
            })
            .collect())
    }

    fn problem2(&self) -> Result<Vec<SuiteRow>> {
        self.cells(2)?
            .iter()
            .map(|c| {
                let value = c.pi.integrate(&c.cost);
                let bound = in_cell(2, c.n, None, integral_tv_bound(&c.pi, &self.pi, &c.cost, &self.cost_u))?.bound;
                Ok(row(2, c.n, None, "average_cost", self.j, (value - self.j).abs(), bound))
            })
            .collect()
    }

    fn rate_rows(&self, problem: u8) -> Result<Vec<SuiteRow>> {
        let cells = self.cells(problem)?;
        let alphas = self.config.rate_alphas();
        let jobs: Vec<(&SequenceCell, f64)> = cells.iter().flat_map(|c| alphas.iter().map(move |&a| (c, a))).collect();
        jobs.into_par_iter()
            .map(|(c, a)| in_cell(problem, c.n, Some(a), self.rate_cell(problem, c, a)))
            .collect()
    }

    fn rate_cell(&self, problem: u8, c: &SequenceCell, a: f64) -> Result<SuiteRow> {
        let alpha = RiskFactor::new(a)?;
        let k = self.config.horizon_k;
        let opts = SolverOptions::default();
        if problem == 3 {
            let sg = set_rate_gap(&self.model.family, &c.control, &self.model.target, alpha, &self.config.budget)?;
            let f = indicator(&sg.worst_set);
            let reference = solve_risk_poisson(&self.p, &f, alpha, &opts)?.lambda;
            let bound = rate_proximity(&c.p, &f, &self.p, &f, alpha, k)?.bound;
            Ok(row(3, c.n, Some(a), "set_rate", reference, sg.gap, bound))
        } else {
            let reference = a * solve_risk_poisson(&self.p, &self.cost_u, alpha, &opts)?.lambda;
            let value = a * solve_risk_poisson(&c.p, &c.cost, alpha, &opts)?.lambda;
            let bound = a.abs() * rate_proximity(&c.p, &c.cost, &self.p, &self.cost_u, alpha, k)?.bound;
            Ok(row(4, c.n, Some(a), "risk_functional", reference, (value - reference).abs(), bound))
        }
    }

    fn problem5(&self) -> Result<Vec<SuiteRow>> {
        let opts = SolverOptions::default();
        self.config
            .small_alphas()
            .into_par_iter()
            .enumerate()
            .map(|(j, a)| {
                in_cell(5, j, Some(a), (|| {
                    let alpha = RiskFactor::new(a)?;
                    let sg = small_risk_set_gap(&self.model.family, &self.model.target, alpha, &self.config.budget)?;
                    let f = indicator(&sg.worst_set);
                    let span_w = solve_risk_poisson(&self.p, &f, alpha, &opts)?.span();
                    let bound = small_risk_bound(span_w, span_seminorm(&f), a, self.delta());
                    Ok(row(5, j, Some(a), "small_risk_set_gap", self.pi.integrate(&f), sg.gap, bound))
                })())
            })
            .collect()
    }

    fn problem6(&self) -> Result<Vec<SuiteRow>> {
        let cells = self.cells(6)?;
        let joint: Vec<JointCell> = cells
            .iter()
            .map(|c| {
                let a = 0.5f64.powi(c.n as i32);
                Ok(JointCell { n: c.n, alpha: in_cell(6, c.n, Some(a), RiskFactor::new(a))?, control: c.control.clone() })
            })
            .collect::<Result<_>>()?;
        let trace = joint_limit_trace(&self.model.family, &self.model.target, &joint, &self.model.cost)?;
        cells
            .par_iter()
            .zip(trace.par_iter())
            .map(|(c, t)| {
                in_cell(6, c.n, Some(t.alpha), (|| {
                    let alpha = RiskFactor::new(t.alpha)?;
                    let sol = solve_risk_poisson(&c.p, &c.cost, alpha, &SolverOptions::default())?;
                    let risk_part = small_risk_bound(sol.span(), span_seminorm(&c.cost), t.alpha, self.delta());
                    let control_part = integral_tv_bound(&c.pi, &self.pi, &c.cost, &self.cost_u)?.bound;
                    let mut r = row(6, c.n, Some(t.alpha), "joint_limit", t.reference, t.gap, risk_part + control_part);
                    r.pass &= t.pass;
                    Ok(r)
                })())
            })
            .collect()
    }
}

/// `max_x TV(A(x,·), π)` for a matrix power `A`.
fn exact_doob(a: &StochasticMatrix, pi: &Distribution) -> f64 {
    a.rows().map(|r| tv_distance(r, pi.probs())).fold(0.0, f64::max)
}

fn row(problem: u8, n: usize, alpha: Option<f64>, quantity: &str, reference: f64, gap: f64, bound: f64) -> SuiteRow {
    SuiteRow { problem, n, alpha, quantity: quantity.into(), reference, gap, bound, pass: gap <= bound + BOUND_SLACK }
}

fn apply_final_tolerance(rows: &mut [SuiteRow]) {
    let Some(last_n) = rows.iter().map(|r| r.n).max() else { return };
    for r in rows.iter_mut().filter(|r| r.n == last_n) {
        r.pass &= r.gap < FINAL_TOLERANCE;
    }
}

/// Runs the selected problems on an already loaded model.
pub fn run_suite_with_model(model: &Model, config: &ExperimentConfig) -> Result<SuiteReport> {
    config.validate()?;
    let certificates = certify(model, &config.budget)?;
    for &p in &config.problems {
        certificates.require(p)?;
    }
    let ctx = Context::new(model, config, &certificates)?;
    let mut problems = config.problems.clone();
    problems.sort_unstable();
    problems.dedup();
    let mut rows = Vec::new();
    for p in problems {
        let mut block = match p {
            1 => ctx.problem1()?,
            2 => ctx.problem2()?,
            3 | 4 => ctx.rate_rows(p)?,
            5 => ctx.problem5()?,
            _ => ctx.problem6()?,
        };
        apply_final_tolerance(&mut block);
        rows.extend(block);
    }
    Ok(SuiteReport { model: model.name.clone(), certificates, rows })
}

/// Loads the configured model and runs the selected problems.
pub fn run_problem_suite(config: &ExperimentConfig) -> Result<SuiteReport> {
    let model = Model::resolve(&config.model)?;
    run_suite_with_model(&model, config)
}

/// CSV with header `problem,n,alpha,quantity,reference,gap,bound,pass`.
pub fn render_csv(rows: &[SuiteRow]) -> Result<String> {
    to_csv(rows)
}

/// Serializes records as CSV with a header row taken from the field names.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidArgument(format!("csv: {e}")))
}

pub fn render_json(report: &SuiteReport) -> Result<String> {
    serde_json::to_string_pretty(report).map_err(|e| Error::InvalidArgument(format!("json: {e}")))
}

impl SequenceChoice {
    pub fn rule(&self, target: MarkovControl) -> Result<ControlSequenceRule> {
        match self {
            SequenceChoice::GridRound => Ok(ControlSequenceRule::grid_round(target)),
            SequenceChoice::Explicit(list) => ControlSequenceRule::explicit(target, list.clone()),
        }
    }
}
