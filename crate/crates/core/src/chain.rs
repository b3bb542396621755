//! Finite controlled Markov chains.
//!
//! A [`KernelFamily`] gives the controlled law `P^a(x, ·)` for every state `x`
//! and admissible control value `a ∈ [0, 1]`. Closing the loop with a
//! [`MarkovControl`] `u` yields the row-stochastic [`StochasticMatrix`]
//! `P^{u(x)}(x, ·)`. Distributions are dense probability vectors, so every
//! supremum over events reduces to a finite computation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows whose entries or sums are off by more than this are rejected.
pub const MALFORMED_TOL: f64 = 1e-9;

/// Control values within this distance of a table grid value select it.
const CONTROL_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    size: usize,
    labels: Option<Vec<String>>,
}

impl StateSpace {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidArgument("state space must be nonempty".into()));
        }
        Ok(Self { size, labels: None })
    }

    pub fn with_labels(labels: Vec<String>) -> Result<Self> {
        let mut space = Self::new(labels.len())?;
        space.labels = Some(labels);
        Ok(space)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn label(&self, x: usize) -> String {
        match &self.labels {
            Some(labels) => labels[x].clone(),
            None => x.to_string(),
        }
    }
}

/// The control parameter set `U ⊆ [0, 1]` used for suprema over controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlSet {
    /// `{0, step, 2·step, …, 1}`; `1/step` must be an integer.
    Grid(f64),
    /// Distinct values in `[0, 1]`, sorted ascending.
    Finite(Vec<f64>),
}

impl ControlSet {
    pub fn grid(step: f64) -> Result<Self> {
        let set = ControlSet::Grid(step);
        set.check()?;
        Ok(set)
    }

    pub fn finite(mut values: Vec<f64>) -> Result<Self> {
        values.sort_by(|a, b| a.total_cmp(b));
        let set = ControlSet::Finite(values);
        set.check()?;
        Ok(set)
    }

    pub fn check(&self) -> Result<()> {
        match self {
            ControlSet::Grid(step) => {
                if !(*step > 0.0 && *step <= 1.0) {
                    return Err(Error::InvalidArgument(format!("grid step {step} not in (0, 1]")));
                }
                let count = (1.0 / step).round();
                if (count * step - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "grid step {step} does not divide [0, 1]"
                    )));
                }
                Ok(())
            }
            ControlSet::Finite(values) => {
                if values.is_empty() {
                    return Err(Error::InvalidArgument("empty control set".into()));
                }
                if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(Error::InvalidArgument("control values must lie in [0, 1]".into()));
                }
                if values.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidArgument(
                        "control values must be distinct and ascending".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            ControlSet::Grid(step) => {
                let count = (1.0 / step).round() as usize;
                (0..=count).map(|i| i as f64 / count as f64).collect()
            }
            ControlSet::Finite(values) => values.clone(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ControlSet::Grid(step) => (1.0 / step).round() as usize + 1,
            ControlSet::Finite(values) => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A probability vector over a finite state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    /// Validates and re-normalizes `probs`.
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        normalize_row(&mut probs, 0)?;
        Ok(Self(probs))
    }

    pub fn point_mass(n: usize, x: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[x] = 1.0;
        Self(probs)
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub(crate) fn from_vec_unchecked(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `μ(f) = Σ_y μ(y) f(y)`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        dot(&self.0, f)
    }

    /// `μ(B)` for a set given by its member states.
    pub fn measure_of(&self, set: &[usize]) -> f64 {
        set.iter().map(|&y| self.0[y]).sum()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Dense row-stochastic matrix, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticMatrix {
    n: usize,
    data: Vec<f64>,
}

impl StochasticMatrix {
    /// Builds from rows, clamping tiny negatives and re-normalizing.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::MalformedFamily("empty matrix".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for (x, mut row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: row.len() });
            }
            normalize_row(&mut row, x)?;
            data.extend_from_slice(&row);
        }
        Ok(Self { n, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for x in 0..n {
            data[x * n + x] = 1.0;
        }
        Self { n, data }
    }

    pub(crate) fn from_flat_unchecked(n: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.data[x * self.n..(x + 1) * self.n]
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[x * self.n + y]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn row_distribution(&self, x: usize) -> Distribution {
        Distribution(self.row(x).to_vec())
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &StochasticMatrix) -> StochasticMatrix {
        assert_eq!(self.n, other.n, "matrix sizes differ");
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for x in 0..n {
            let out = &mut data[x * n..(x + 1) * n];
            for (z, &pxz) in self.row(x).iter().enumerate() {
                if pxz == 0.0 {
                    continue;
                }
                for (o, &pzy) in out.iter_mut().zip(other.row(z)) {
                    *o += pxz * pzy;
                }
            }
        }
        StochasticMatrix { n, data }
    }

    /// Row vector times matrix: `(μP)(y) = Σ_x μ(x) P(x, y)`.
    pub fn push_forward(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (x, &m) in mu.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (o, &p) in out.iter_mut().zip(self.row(x)) {
                *o += m * p;
            }
        }
        out
    }

    /// Matrix times column vector: `(Pg)(x) = Σ_y P(x, y) g(y)`.
    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        self.rows().map(|row| dot(row, g)).collect()
    }

    /// Support graph adjacency: `y` is a successor of `x` when `P(x, y) > 0`.
    pub fn successors(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(x).iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(y, _)| y)
    }

    /// Dobrushin coefficient of this single matrix: max TV between two rows.
    pub fn contraction_coefficient(&self) -> f64 {
        let mut best: f64 = 0.0;
        for x in 0..self.n {
            for x2 in (x + 1)..self.n {
                best = best.max(tv_distance(self.row(x), self.row(x2)));
            }
        }
        best
    }
}

/// Markov control `u: E → U`; entry `x` is `u(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovControl(Vec<f64>);

impl MarkovControl {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn constant(n: usize, a: f64) -> Self {
        Self(vec![a; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_distance(&self, other: &MarkovControl) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    /// Probabilities indexed `(state, control index, next state)`, flattened.
    Table { probs: Vec<f64> },
    /// `P^a(x, ·) = (1 − a) Q0(x, ·) + a Q1(x, ·)`.
    Mixture { q0: StochasticMatrix, q1: StochasticMatrix },
}

/// The controlled transition law `P^a(x, ·)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelFamily {
    states: StateSpace,
    controls: ControlSet,
    kernel: Kernel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rows_checked: usize,
    pub max_row_residual: f64,
    pub negative_entries: usize,
    pub min_entry: f64,
    pub valid: bool,
}

impl KernelFamily {
    /// Table family; `probs[x][i][y]` is `P^{a_i}(x, y)` for the `i`-th value of `controls`.
    pub fn table(states: StateSpace, controls: ControlSet, probs: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        controls.check()?;
        let n = states.size();
        let c = controls.len();
        if probs.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: probs.len() });
        }
        let mut flat = Vec::with_capacity(n * c * n);
        for per_state in probs {
            if per_state.len() != c {
                return Err(Error::DimensionMismatch { expected: c, found: per_state.len() });
            }
            for row in per_state {
                if row.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: row.len() });
                }
                flat.extend(row);
            }
        }
        let mut family = Self { states, controls, kernel: Kernel::Table { probs: flat } };
        validate_family(&family)?;
        if let Kernel::Table { probs } = &mut family.kernel {
            for (i, row) in probs.chunks_mut(n).enumerate() {
                normalize_row(row, i / c)?;
            }
        }
        Ok(family)
    }

    /// Mixture family between two stochastic matrices; `grid` discretizes `[0, 1]` for suprema.
    pub fn mixture(grid: ControlSet, q0: Vec<Vec<f64>>, q1: Vec<Vec<f64>>) -> Result<Self> {
        grid.check()?;
        let n = q0.len();
        if q1.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: q1.len() });
        }
        let raw = |rows: Vec<Vec<f64>>| -> Result<StochasticMatrix> {
            let mut data = Vec::with_capacity(n * n);
            for row in rows {
                if row.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: row.len() });
                }
                data.extend(row);
            }
            Ok(StochasticMatrix::from_flat_unchecked(n, data))
        };
        let mut family = Self {
            states: StateSpace::new(n)?,
            controls: grid,
            kernel: Kernel::Mixture { q0: raw(q0)?, q1: raw(q1)? },
        };
        validate_family(&family)?;
        if let Kernel::Mixture { q0, q1 } = &mut family.kernel {
            *q0 = StochasticMatrix::from_rows(q0.to_rows())?;
            *q1 = StochasticMatrix::from_rows(q1.to_rows())?;
        }
        Ok(family)
    }

    pub fn with_states(mut self, states: StateSpace) -> Result<Self> {
        if states.size() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: states.size() });
        }
        self.states = states;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.states.size()
    }

    pub fn states(&self) -> &StateSpace {
        &self.states
    }

    pub fn control_set(&self) -> &ControlSet {
        &self.controls
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// Control grid used for suprema over `U`.
    pub fn control_values(&self) -> Vec<f64> {
        self.controls.values()
    }

    fn table_index(&self, state: usize, a: f64) -> Result<usize> {
        self.controls
            .values()
            .iter()
            .position(|v| (v - a).abs() <= CONTROL_MATCH_TOL)
            .ok_or(Error::ControlOutOfRange { state, value: a })
    }

    pub fn is_admissible(&self, state: usize, a: f64) -> bool {
        match &self.kernel {
            Kernel::Table { .. } => self.table_index(state, a).is_ok(),
            Kernel::Mixture { .. } => (-1e-12..=1.0 + 1e-12).contains(&a),
        }
    }

    pub fn check_control(&self, u: &MarkovControl) -> Result<()> {
        if u.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: u.len() });
        }
        for (x, &a) in u.values().iter().enumerate() {
            if !self.is_admissible(x, a) {
                return Err(Error::ControlOutOfRange { state: x, value: a });
            }
        }
        Ok(())
    }

    /// `P^a(x, ·)`.
    pub fn row(&self, x: usize, a: f64) -> Result<Vec<f64>> {
        let n = self.n();
        match &self.kernel {
            Kernel::Table { probs } => {
                let i = self.table_index(x, a)?;
                let c = self.controls.len();
                let start = (x * c + i) * n;
                Ok(probs[start..start + n].to_vec())
            }
            Kernel::Mixture { q0, q1 } => {
                if !self.is_admissible(x, a) {
                    return Err(Error::ControlOutOfRange { state: x, value: a });
                }
                let a = a.clamp(0.0, 1.0);
                let mut row: Vec<f64> =
                    q0.row(x).iter().zip(q1.row(x)).map(|(p0, p1)| (1.0 - a) * p0 + a * p1).collect();
                let sum: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= sum);
                Ok(row)
            }
        }
    }

    /// Every row `P^a(x, ·)` for `a` on the control grid, tagged with `(x, a)`.
    pub fn grid_rows(&self) -> Vec<(usize, f64, Vec<f64>)> {
        let values = self.control_values();
        let mut out = Vec::with_capacity(self.n() * values.len());
        for x in 0..self.n() {
            for &a in &values {
                out.push((x, a, self.row(x, a).expect("grid controls are admissible")));
            }
        }
        out
    }
}

fn row_stats(row: &[f64], report: &mut ValidationReport) {
    report.rows_checked += 1;
    let sum: f64 = row.iter().sum();
    report.max_row_residual = report.max_row_residual.max((sum - 1.0).abs());
    for &p in row {
        if p < 0.0 {
            report.negative_entries += 1;
        }
        report.min_entry = report.min_entry.min(p);
    }
}

/// Row-sum residuals and entry signs over every `(x, a)` on the control grid.
pub fn validate_family(family: &KernelFamily) -> Result<ValidationReport> {
    let mut report = ValidationReport {
        rows_checked: 0,
        max_row_residual: 0.0,
        negative_entries: 0,
        min_entry: f64::INFINITY,
        valid: false,
    };
    let n = family.n();
    match &family.kernel {
        Kernel::Table { probs } => {
            for row in probs.chunks(n) {
                row_stats(row, &mut report);
            }
        }
        Kernel::Mixture { q0, q1 } => {
            for a in family.control_values() {
                for x in 0..n {
                    let row: Vec<f64> =
                        q0.row(x).iter().zip(q1.row(x)).map(|(p0, p1)| (1.0 - a) * p0 + a * p1).collect();
                    row_stats(&row, &mut report);
                }
            }
            // a mixture is stochastic for every a iff both endpoints are
            for q in [q0, q1] {
                for row in q.rows() {
                    row_stats(row, &mut report);
                }
            }
        }
    }
    if report.max_row_residual > MALFORMED_TOL || report.min_entry < -MALFORMED_TOL {
        return Err(Error::MalformedFamily(format!(
            "max row-sum residual {:.3e}, min entry {:.3e}",
            report.max_row_residual, report.min_entry
        )));
    }
    report.valid = report.max_row_residual <= 1e-12 && report.min_entry >= -1e-12;
    Ok(report)
}

/// Closed-loop kernel `P^{u(x)}(x, ·)`.
pub fn closed_loop(family: &KernelFamily, u: &MarkovControl) -> Result<StochasticMatrix> {
    family.check_control(u)?;
    let n = family.n();
    let mut data = Vec::with_capacity(n * n);
    for (x, &a) in u.values().iter().enumerate() {
        data.extend(family.row(x, a)?);
    }
    Ok(StochasticMatrix::from_flat_unchecked(n, data))
}

/// `P^k` by repeated multiplication; `P^0` is the identity.
pub fn k_step(p: &StochasticMatrix, k: usize) -> StochasticMatrix {
    let mut out = StochasticMatrix::identity(p.n());
    for _ in 0..k {
        out = out.compose(p);
    }
    out
}

/// `sup_B (d1(B) − d2(B)) = ½ Σ_y |d1(y) − d2(y)|`.
pub fn total_variation(d1: &Distribution, d2: &Distribution) -> Result<f64> {
    if d1.len() != d2.len() {
        return Err(Error::DimensionMismatch { expected: d1.len(), found: d2.len() });
    }
    Ok(tv_distance(d1.probs(), d2.probs()))
}

/// Total variation between two probability vectors of equal length.
pub fn tv_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let l1: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    (0.5 * l1).clamp(0.0, 1.0)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Clamps entries in `[-MALFORMED_TOL, 0)` to zero and rescales to unit mass.
pub(crate) fn normalize_row(row: &mut [f64], state: usize) -> Result<()> {
    if let Some(&bad) = row.iter().find(|p| !p.is_finite() || **p < -MALFORMED_TOL) {
        return Err(Error::MalformedFamily(format!("row {state} has entry {bad}")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > MALFORMED_TOL {
        return Err(Error::MalformedFamily(format!("row {state} sums to {sum}")));
    }
    row.iter_mut().for_each(|p| *p = p.max(0.0));
    let sum: f64 = row.iter().sum();
    if sum <= 0.0 {
        return Err(Error::DegenerateRow(state));
    }
    row.iter_mut().for_each(|p| *p /= sum);
    Ok(())
}

/// How a cost depends on the control value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CostForm {
    /// `c(x, a) = c0(x) + c1(x)·a`.
    Linear { c0: Vec<f64>, c1: Vec<f64> },
    /// Values on a control grid, linearly interpolated in between.
    Table { controls: Vec<f64>, values: Vec<Vec<f64>> },
}

/// Bounded cost `c(x, a)`, continuous in `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostFunction {
    form: CostForm,
    c_min: f64,
    c_max: f64,
}

impl CostFunction {
    pub fn linear(c0: Vec<f64>, c1: Vec<f64>) -> Result<Self> {
        if c0.len() != c1.len() {
            return Err(Error::DimensionMismatch { expected: c0.len(), found: c1.len() });
        }
        if c0.iter().chain(&c1).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("cost coefficients must be finite".into()));
        }
        let ends = c0.iter().zip(&c1).flat_map(|(a, b)| [*a, a + b]);
        let (c_min, c_max) = min_max(ends);
        Ok(Self { form: CostForm::Linear { c0, c1 }, c_min, c_max })
    }

    /// Cost that ignores the control value.
    pub fn state_only(c: Vec<f64>) -> Result<Self> {
        let zeros = vec![0.0; c.len()];
        Self::linear(c, zeros)
    }

    pub fn constant(n: usize, value: f64) -> Result<Self> {
        Self::state_only(vec![value; n])
    }

    /// `values[x][i]` is `c(x, a_i)` for the `i`-th value of `controls`.
    pub fn table(controls: &ControlSet, values: Vec<Vec<f64>>) -> Result<Self> {
        let grid = controls.values();
        for row in &values {
            if row.len() != grid.len() {
                return Err(Error::DimensionMismatch { expected: grid.len(), found: row.len() });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("cost values must be finite".into()));
            }
        }
        let (c_min, c_max) = min_max(values.iter().flatten().copied());
        Ok(Self { form: CostForm::Table { controls: grid, values }, c_min, c_max })
    }

    pub fn form(&self) -> &CostForm {
        &self.form
    }

    pub fn n(&self) -> usize {
        match &self.form {
            CostForm::Linear { c0, .. } => c0.len(),
            CostForm::Table { values, .. } => values.len(),
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.c_min, self.c_max)
    }

    pub fn range(&self) -> f64 {
        self.c_max - self.c_min
    }

    pub fn eval(&self, x: usize, a: f64) -> Result<f64> {
        match &self.form {
            CostForm::Linear { c0, c1 } => Ok(c0[x] + c1[x] * a),
            CostForm::Table { controls, values } => {
                let row = &values[x];
                let lo = controls[0];
                let hi = controls[controls.len() - 1];
                if a < lo - CONTROL_MATCH_TOL || a > hi + CONTROL_MATCH_TOL {
                    return Err(Error::ControlOutOfRange { state: x, value: a });
                }
                let a = a.clamp(lo, hi);
                let i = controls.partition_point(|&v| v <= a);
                if i == 0 {
                    return Ok(row[0]);
                }
                if i == controls.len() {
                    return Ok(row[i - 1]);
                }
                let t = (a - controls[i - 1]) / (controls[i] - controls[i - 1]);
                Ok(row[i - 1] + t * (row[i] - row[i - 1]))
            }
        }
    }

    /// `c_u(x) = c(x, u(x))`.
    pub fn closed_loop(&self, u: &MarkovControl) -> Result<Vec<f64>> {
        if u.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: u.len() });
        }
        u.values().iter().enumerate().map(|(x, &a)| self.eval(x, a)).collect()
    }

    /// The cost `c + κ`.
    pub fn offset(&self, kappa: f64) -> Self {
        let form = match &self.form {
            CostForm::Linear { c0, c1 } => {
                CostForm::Linear { c0: c0.iter().map(|v| v + kappa).collect(), c1: c1.clone() }
            }
            CostForm::Table { controls, values } => CostForm::Table {
                controls: controls.clone(),
                values: values.iter().map(|r| r.iter().map(|v| v + kappa).collect()).collect(),
            },
        };
        Self { form, c_min: self.c_min + kappa, c_max: self.c_max + kappa }
    }
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn swap_family() -> KernelFamily {
        KernelFamily::mixture(
            ControlSet::grid(0.5).unwrap(),
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        )
        .unwrap()
    }

    #[test]
    fn uniform_mixture_is_valid() {
        let half = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        let fam = KernelFamily::mixture(ControlSet::grid(0.25).unwrap(), half.clone(), half).unwrap();
        let report = validate_family(&fam).unwrap();
        assert!(report.valid);
        assert_eq!(report.min_entry, 0.5);
    }

    #[test]
    fn table_with_excess_mass_is_malformed() {
        let states = StateSpace::new(2).unwrap();
        let controls = ControlSet::finite(vec![0.0]).unwrap();
        let err = KernelFamily::table(
            states,
            controls,
            vec![vec![vec![0.7, 0.31]], vec![vec![0.5, 0.5]]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::MalformedFamily(_)));
    }

    #[test]
    fn tiny_negative_entries_are_clamped() {
        let fam = KernelFamily::mixture(
            ControlSet::grid(1.0).unwrap(),
            vec![vec![1.0 + 1e-13, -1e-13], vec![0.5, 0.5]],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        )
        .unwrap();
        let row = fam.row(0, 0.0).unwrap();
        assert_eq!(row, vec![1.0, 0.0]);
    }

    #[test]
    fn midpoint_mixture_row() {
        let fam = swap_family();
        assert_eq!(fam.row(0, 0.5).unwrap(), vec![0.5, 0.5]);
        assert!(validate_family(&fam).unwrap().valid);
    }

    #[test]
    fn closed_loop_endpoints_and_mixing() {
        let fam = swap_family();
        let p0 = closed_loop(&fam, &MarkovControl::constant(2, 0.0)).unwrap();
        assert_eq!(p0.to_rows(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let p1 = closed_loop(&fam, &MarkovControl::constant(2, 1.0)).unwrap();
        assert_eq!(p1.to_rows(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let p = closed_loop(&fam, &MarkovControl::new(vec![0.25, 0.75])).unwrap();
        assert_eq!(p.to_rows(), vec![vec![0.75, 0.25], vec![0.75, 0.25]]);
    }

    #[test]
    fn closed_loop_rejects_inadmissible() {
        let fam = swap_family();
        let err = closed_loop(&fam, &MarkovControl::new(vec![0.5, 1.5])).unwrap_err();
        assert_eq!(err, Error::ControlOutOfRange { state: 1, value: 1.5 });

        let states = StateSpace::new(1).unwrap();
        let table = KernelFamily::table(states, ControlSet::finite(vec![0.0, 1.0]).unwrap(), vec![vec![
            vec![1.0],
            vec![1.0],
        ]])
        .unwrap();
        assert!(closed_loop(&table, &MarkovControl::new(vec![0.5])).is_err());
        assert!(closed_loop(&table, &MarkovControl::new(vec![1.0])).is_ok());
    }

    #[test]
    fn k_step_cases() {
        let swap = StochasticMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(k_step(&swap, 0), StochasticMatrix::identity(2));
        assert_eq!(k_step(&swap, 2), StochasticMatrix::identity(2));
        let half = StochasticMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert_eq!(k_step(&half, 3), half);
    }

    #[test]
    fn total_variation_cases() {
        let d = |v: Vec<f64>| Distribution::new(v).unwrap();
        assert_eq!(total_variation(&d(vec![0.5, 0.5]), &d(vec![0.5, 0.5])).unwrap(), 0.0);
        assert_eq!(total_variation(&d(vec![1.0, 0.0]), &d(vec![0.0, 1.0])).unwrap(), 1.0);
        assert_abs_diff_eq!(
            total_variation(&d(vec![0.7, 0.3]), &d(vec![0.4, 0.6])).unwrap(),
            0.3,
            epsilon = 1e-15
        );
        assert!(total_variation(&d(vec![1.0]), &d(vec![0.5, 0.5])).is_err());
    }

    #[test]
    fn control_sets() {
        assert_eq!(ControlSet::grid(0.25).unwrap().values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(ControlSet::grid(0.3).is_err());
        assert!(ControlSet::grid(0.0).is_err());
        assert!(ControlSet::finite(vec![]).is_err());
        assert!(ControlSet::finite(vec![0.5, 0.5]).is_err());
        assert!(ControlSet::finite(vec![1.2]).is_err());
        assert_eq!(ControlSet::finite(vec![0.5, 0.1]).unwrap().values(), vec![0.1, 0.5]);
    }

    #[test]
    fn table_cost_interpolates() {
        let grid = ControlSet::grid(0.5).unwrap();
        let cost = CostFunction::table(&grid, vec![vec![0.0, 1.0, 3.0]]).unwrap();
        assert_abs_diff_eq!(cost.eval(0, 0.25).unwrap(), 0.5);
        assert_abs_diff_eq!(cost.eval(0, 0.75).unwrap(), 2.0);
        assert_abs_diff_eq!(cost.eval(0, 1.0).unwrap(), 3.0);
        assert_eq!(cost.bounds(), (0.0, 3.0));
        let lin = CostFunction::linear(vec![0.0, 1.0], vec![0.5, -2.0]).unwrap();
        assert_eq!(lin.bounds(), (-1.0, 1.0));
    }

    fn random_dist(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, n).prop_map(|v| {
            let s: f64 = v.iter().sum::<f64>() + 1e-9;
            v.iter().map(|x| (x + 1e-9 / v.len() as f64) / s).collect()
        })
    }

    fn random_matrix(n: usize) -> impl Strategy<Value = StochasticMatrix> {
        prop::collection::vec(random_dist(n), n)
            .prop_map(|rows| StochasticMatrix::from_rows(rows).unwrap())
    }

    proptest! {
        #[test]
        fn tv_is_a_metric((a, b, c) in (1usize..7).prop_flat_map(|n| (random_dist(n), random_dist(n), random_dist(n)))) {
            let ab = tv_distance(&a, &b);
            prop_assert!((ab - tv_distance(&b, &a)).abs() < 1e-15);
            prop_assert!(ab <= tv_distance(&a, &c) + tv_distance(&c, &b) + 1e-12);
            prop_assert_eq!(tv_distance(&a, &a), 0.0);
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn closed_loop_rows_are_stochastic(
            (q0, q1, u) in (1usize..7).prop_flat_map(|n| (random_matrix(n), random_matrix(n), prop::collection::vec(0.0f64..=1.0, n)))
        ) {
            let fam = KernelFamily::mixture(ControlSet::grid(0.5).unwrap(), q0.to_rows(), q1.to_rows()).unwrap();
            let p = closed_loop(&fam, &MarkovControl::new(u)).unwrap();
            for row in p.rows() {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                prop_assert!(row.iter().all(|&v| v >= 0.0));
            }
        }

        #[test]
        fn k_step_semigroup((p, j, k) in (1usize..6).prop_flat_map(|n| (random_matrix(n), 0usize..6, 0usize..6))) {
            let lhs = k_step(&p, j + k);
            let rhs = k_step(&k_step(&p, j), k);
            let rhs2 = k_step(&p, j).compose(&k_step(&p, k));
            for x in 0..p.n() {
                for y in 0..p.n() {
                    prop_assert!((lhs.get(x, y) - rhs2.get(x, y)).abs() <= 1e-10);
                }
            }
            // (P^j)^k = P^{jk}
            let pow = k_step(&p, j * k);
            for x in 0..p.n() {
                for y in 0..p.n() {
                    prop_assert!((pow.get(x, y) - rhs.get(x, y)).abs() <= 1e-10);
                }
            }
        }

        #[test]
        fn mixture_tv_is_lipschitz_in_control(
            (q0, q1, a, b, x) in (1usize..7).prop_flat_map(|n| (random_matrix(n), random_matrix(n), 0.0f64..=1.0, 0.0f64..=1.0, 0..n))
        ) {
            let fam = KernelFamily::mixture(ControlSet::grid(1.0).unwrap(), q0.to_rows(), q1.to_rows()).unwrap();
            let lhs = tv_distance(&fam.row(x, a).unwrap(), &fam.row(x, b).unwrap());
            let rhs = (a - b).abs() * tv_distance(q0.row(x), q1.row(x));
            prop_assert!(lhs <= rhs + 1e-12);
        }
    }
}
