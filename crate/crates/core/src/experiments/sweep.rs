//! Small-risk sweeps over a grid of risk factors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{small_risk_bound, small_risk_set_gap};
use crate::chain::{closed_loop, MarkovControl};
use crate::ergodicity::invariant_distribution;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::risk::{solve_risk_poisson, span_seminorm, RiskFactor, SolverOptions};
use crate::search::{indicator, ControlSweep, SearchBudget};

const BOUND_SLACK: f64 = 1e-10;

/// `±2⁻ʲ` for `j = 0..=12`, positive factor first at each magnitude.
pub fn default_signed_alphas() -> Vec<f64> {
    (0..=12).flat_map(|j| [0.5f64.powi(j), -0.5f64.powi(j)]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub alpha: f64,
    /// `λ^{u,α}(1_B)` at the worst set.
    pub value: f64,
    /// `π^u(B)` at the worst set.
    pub reference: f64,
    pub gap: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub alphas: Vec<f64>,
    /// Take the outer supremum over every grid control instead of the target only.
    pub over_controls: bool,
    pub budget: SearchBudget,
}

struct Worst {
    gap: f64,
    control: MarkovControl,
    set: Vec<bool>,
}

/// For each risk factor, `sup_u max_B |λ^{u,α}(1_B) − π^u(B)|` against the
/// optimized decomposition bound with the family's certified `Δ`.
pub fn small_risk_sweep(model: &Model, delta: f64, config: &SweepConfig) -> Result<Vec<SweepRow>> {
    let controls: Vec<MarkovControl> = if config.over_controls {
        ControlSweep::new(&model.family, &config.budget).collect()
    } else {
        vec![model.target.clone()]
    };
    let opts = SolverOptions::default();
    config
        .alphas
        .par_iter()
        .enumerate()
        .map(|(n, &a)| {
            let alpha = RiskFactor::new(a)?;
            let mut worst: Option<Worst> = None;
            for u in &controls {
                let sg = small_risk_set_gap(&model.family, u, alpha, &config.budget)?;
                if worst.as_ref().is_none_or(|w| sg.gap > w.gap) {
                    worst = Some(Worst { gap: sg.gap, control: u.clone(), set: sg.worst_set });
                }
            }
            let w = worst.ok_or_else(|| Error::InvalidArgument("no controls to sweep".into()))?;
            let p = closed_loop(&model.family, &w.control)?;
            let f = indicator(&w.set);
            let sol = solve_risk_poisson(&p, &f, alpha, &opts)?;
            let reference = invariant_distribution(&p)?.integrate(&f);
            let bound = small_risk_bound(sol.span(), span_seminorm(&f), a, delta);
            Ok(SweepRow {
                n,
                alpha: a,
                value: sol.lambda,
                reference,
                gap: w.gap,
                bound,
                pass: w.gap <= bound + BOUND_SLACK,
            })
        })
        .collect()
}

/// CSV with header `n,alpha,value,reference,gap,bound,pass`.
pub fn render_sweep_csv(rows: &[SweepRow]) -> Result<String> {
    crate::experiments::suite::to_csv(rows)
}
