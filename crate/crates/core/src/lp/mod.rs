//! Dense-input linear programming with a bounded-variable revised simplex.
//!
//! Every row `a x (<=|>=|=) b` gets a slack `s` with `a x + s = b` and bounds
//! that encode the relation. Rows that are violated at the starting point get
//! an artificial column and a Phase I minimizes their sum. Pricing is
//! Dantzig's rule with lowest-index tie-breaks; after a run of degenerate
//! pivots the solver switches to Bland's rule until the objective moves again,
//! which rules out cycling. Variables may have an infinite upper bound; lower
//! bounds must be finite.

#![allow(clippy::needless_range_loop)]

mod basis;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use self::basis::{BasisFactor, Column};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coefficients: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarBounds {
    pub lower: f64,
    pub upper: f64,
}

impl VarBounds {
    pub const NON_NEGATIVE: VarBounds = VarBounds {
        lower: 0.0,
        upper: f64::INFINITY,
    };
    pub const BINARY: VarBounds = VarBounds { lower: 0.0, upper: 1.0 };

    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<VarBounds>,
}

impl LinearProgram {
    /// New program over `objective.len()` variables, all in `[0, inf)`.
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            sense,
            objective,
            constraints: Vec::new(),
            bounds: vec![VarBounds::NON_NEGATIVE; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_constraint(&mut self, coefficients: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint {
            coefficients,
            relation,
            rhs,
        });
        self
    }

    pub fn with_bounds(mut self, bounds: Vec<VarBounds>) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for c in &self.constraints {
            let lhs: f64 = c.coefficients.iter().zip(x).map(|(a, v)| a * v).sum();
            let v = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (b, &v) in self.bounds.iter().zip(x) {
            worst = worst.max(b.lower - v).max(v - b.upper);
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(Error::Dimension(format!(
                "{} bounds for {n} variables",
                self.bounds.len()
            )));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coefficients.len() != n {
                return Err(Error::Dimension(format!(
                    "constraint {i} has {} coefficients, objective has {n}",
                    c.coefficients.len()
                )));
            }
            if !c.rhs.is_finite() || c.coefficients.iter().any(|a| !a.is_finite()) {
                return Err(Error::InvalidArgument(format!("constraint {i} has non-finite data")));
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("objective has non-finite coefficients".into()));
        }
        for (j, b) in self.bounds.iter().enumerate() {
            if !b.lower.is_finite() || b.upper.is_nan() || b.lower > b.upper {
                return Err(Error::InvalidArgument(format!(
                    "variable {j} has invalid bounds [{}, {}]",
                    b.lower, b.upper
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptions {
    /// Smallest pivot magnitude accepted in the ratio test.
    pub pivot_tol: f64,
    /// Allowed bound/row violation of a reported solution.
    pub feasibility_tol: f64,
    /// Reduced costs below this magnitude count as zero.
    pub optimality_tol: f64,
    /// Hard cap on simplex iterations; `None` picks a size-based default.
    pub max_iterations: Option<usize>,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degenerate_limit: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            pivot_tol: 1e-9,
            feasibility_tol: 1e-7,
            optimality_tol: 1e-9,
            max_iterations: None,
            degenerate_limit: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    /// Objective in the program's own sense; NaN unless optimal.
    pub objective_value: f64,
    pub iterations: usize,
    /// Row duals in the program's own sense: `c - A^T y` are the reduced
    /// costs, and `b^T y` plus the bound terms reproduces the objective.
    pub duals: Vec<f64>,
}

/// Solve `lp` to optimality, or report it infeasible or unbounded.
pub fn solve_lp(lp: &LinearProgram, options: &LpOptions) -> Result<LpSolution> {
    lp.validate()?;
    let sf = StandardForm::new(lp);
    let lower: Vec<f64> = lp.bounds.iter().map(|b| b.lower).collect();
    let upper: Vec<f64> = lp.bounds.iter().map(|b| b.upper).collect();
    sf.solve(&lower, &upper, options, None).map_err(Interrupt::into_error)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Interrupt {
    TimeLimit,
    IterationLimit,
    SingularBasis,
}

impl Interrupt {
    pub(crate) fn into_error(self) -> Error {
        Error::Solver(
            match self {
                Interrupt::TimeLimit => "time limit reached",
                Interrupt::IterationLimit => "simplex iteration limit reached",
                Interrupt::SingularBasis => "numerically singular basis",
            }
            .into(),
        )
    }
}

/// Column-compressed copy of a program's rows, reusable across bound changes.
pub(crate) struct StandardForm {
    n: usize,
    m: usize,
    sense: Sense,
    /// Internal minimization costs.
    cost: Vec<f64>,
    cols: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    relations: Vec<Relation>,
    /// Standard-form row -> original constraint index.
    row_origin: Vec<usize>,
    original_rows: usize,
    /// Original constraints that are all-zero and violated.
    empty_row_conflict: Option<usize>,
}

impl StandardForm {
    pub(crate) fn new(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let mut cols = vec![Vec::new(); n];
        let mut rhs = Vec::new();
        let mut relations = Vec::new();
        let mut row_origin = Vec::new();
        let mut empty_row_conflict = None;
        for (i, c) in lp.constraints.iter().enumerate() {
            if c.coefficients.iter().all(|&a| a == 0.0) {
                let ok = match c.relation {
                    Relation::Le => 0.0 <= c.rhs,
                    Relation::Ge => 0.0 >= c.rhs,
                    Relation::Eq => c.rhs == 0.0,
                };
                if !ok && empty_row_conflict.is_none() {
                    empty_row_conflict = Some(i);
                }
                continue;
            }
            let r = rhs.len();
            for (j, &a) in c.coefficients.iter().enumerate() {
                if a != 0.0 {
                    cols[j].push((r, a));
                }
            }
            rhs.push(c.rhs);
            relations.push(c.relation);
            row_origin.push(i);
        }
        let cost = match lp.sense {
            Sense::Minimize => lp.objective.clone(),
            Sense::Maximize => lp.objective.iter().map(|c| -c).collect(),
        };
        Self {
            n,
            m: rhs.len(),
            sense: lp.sense,
            cost,
            cols,
            rhs,
            relations,
            row_origin,
            original_rows: lp.constraints.len(),
            empty_row_conflict,
        }
    }

    /// Solve with per-variable bounds overriding the program's own.
    pub(crate) fn solve(
        &self,
        lower: &[f64],
        upper: &[f64],
        options: &LpOptions,
        deadline: Option<Instant>,
    ) -> std::result::Result<LpSolution, Interrupt> {
        if self.empty_row_conflict.is_some() || lower.iter().zip(upper).any(|(l, u)| l > u) {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: lower.to_vec(),
                objective_value: f64::NAN,
                iterations: 0,
                duals: vec![0.0; self.original_rows],
            });
        }
        let mut simplex = Simplex::new(self, lower, upper, options, deadline);
        simplex.run()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Simplex<'a> {
    sf: &'a StandardForm,
    opts: LpOptions,
    deadline: Option<Instant>,
    /// Singleton columns beyond the structurals: slacks, then artificials.
    extra: Vec<(usize, f64)>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    n_artificial: usize,
    iterations: usize,
    max_iterations: usize,
}

impl<'a> Simplex<'a> {
    fn new(sf: &'a StandardForm, lower: &[f64], upper: &[f64], opts: &LpOptions, deadline: Option<Instant>) -> Self {
        let (n, m) = (sf.n, sf.m);
        let mut lo = lower.to_vec();
        let mut hi = upper.to_vec();
        let mut x = lower.to_vec();
        let mut state = vec![VarState::AtLower; n];
        let mut extra = Vec::with_capacity(2 * m);

        // row activity at the starting point
        let mut activity = vec![0.0; m];
        for (j, col) in sf.cols.iter().enumerate() {
            if x[j] != 0.0 {
                for &(r, a) in col {
                    activity[r] += a * x[j];
                }
            }
        }

        let mut basis = vec![usize::MAX; m];
        let mut artificials = Vec::new();
        for r in 0..m {
            let (slo, shi) = match sf.relations[r] {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            extra.push((r, 1.0));
            lo.push(slo);
            hi.push(shi);
            let s = sf.rhs[r] - activity[r];
            if s >= slo && s <= shi {
                x.push(s);
                state.push(VarState::Basic(r));
                basis[r] = n + r;
            } else {
                let (bound, st) = if s < slo {
                    (slo, VarState::AtLower)
                } else {
                    (shi, VarState::AtUpper)
                };
                x.push(bound);
                state.push(st);
                artificials.push((r, s - bound));
            }
        }
        let n_artificial = artificials.len();
        for (r, residual) in artificials {
            let j = n + extra.len();
            extra.push((r, residual.signum()));
            lo.push(0.0);
            hi.push(f64::INFINITY);
            x.push(residual.abs());
            state.push(VarState::Basic(r));
            basis[r] = j;
        }

        let total = n + extra.len();
        let max_iterations = opts.max_iterations.unwrap_or(50_000 + 50 * (n + m));
        Self {
            sf,
            opts: *opts,
            deadline,
            extra,
            lo,
            hi,
            cost: vec![0.0; total],
            x,
            state,
            basis,
            n_artificial,
            iterations: 0,
            max_iterations,
        }
    }

    fn column(&self, j: usize) -> &Column {
        if j < self.sf.n {
            &self.sf.cols[j]
        } else {
            std::slice::from_ref(&self.extra[j - self.sf.n])
        }
    }

    fn total_columns(&self) -> usize {
        self.sf.n + self.extra.len()
    }

    fn first_artificial(&self) -> usize {
        self.sf.n + self.sf.m
    }

    fn run(&mut self) -> std::result::Result<LpSolution, Interrupt> {
        let (n, m) = (self.sf.n, self.sf.m);
        if self.n_artificial > 0 {
            let first = self.first_artificial();
            for j in first..self.total_columns() {
                self.cost[j] = 1.0;
            }
            self.phase()?;
            let infeasibility: f64 = (first..self.total_columns()).map(|j| self.x[j].max(0.0)).sum();
            if infeasibility > self.opts.feasibility_tol {
                return Ok(LpSolution {
                    status: LpStatus::Infeasible,
                    x: self.x[..n].to_vec(),
                    objective_value: f64::NAN,
                    iterations: self.iterations,
                    duals: vec![0.0; self.sf.original_rows],
                });
            }
            for j in first..self.total_columns() {
                self.cost[j] = 0.0;
                self.hi[j] = 0.0;
                if !matches!(self.state[j], VarState::Basic(_)) {
                    self.state[j] = VarState::AtLower;
                    self.x[j] = 0.0;
                }
            }
        }
        self.cost[..n].copy_from_slice(&self.sf.cost);
        let end = self.phase()?;
        let x = self.x[..n].to_vec();
        match end {
            PhaseEnd::Unbounded => Ok(LpSolution {
                status: LpStatus::Unbounded,
                x,
                objective_value: f64::NAN,
                iterations: self.iterations,
                duals: vec![0.0; self.sf.original_rows],
            }),
            PhaseEnd::Optimal => {
                let factor = self.factorize()?;
                let cb: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
                let y = factor.solve_transpose(|p| self.column(self.basis[p]), &cb);
                let internal: f64 = self.sf.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
                let (objective_value, flip) = match self.sf.sense {
                    Sense::Minimize => (internal, 1.0),
                    Sense::Maximize => (-internal, -1.0),
                };
                let mut duals = vec![0.0; self.sf.original_rows];
                for r in 0..m {
                    duals[self.sf.row_origin[r]] = flip * y[r];
                }
                #[cfg(debug_assertions)]
                self.debug_check_duality(&y, internal);
                Ok(LpSolution {
                    status: LpStatus::Optimal,
                    x,
                    objective_value,
                    iterations: self.iterations,
                    duals,
                })
            }
        }
    }

    /// Weak duality at the final basis: `b^T y + sum min(d_j l_j, d_j u_j)`
    /// is a lower bound on the internal (minimization) objective and must
    /// meet it at an optimum.
    #[cfg(debug_assertions)]
    fn debug_check_duality(&self, y: &[f64], primal: f64) {
        let mut bound: f64 = self.sf.rhs.iter().zip(y).map(|(b, v)| b * v).sum();
        for j in 0..self.total_columns() {
            let mut d = self.cost[j];
            for &(r, a) in self.column(j) {
                d -= a * y[r];
            }
            if d.abs() <= self.opts.optimality_tol {
                continue;
            }
            bound += if d > 0.0 { d * self.lo[j] } else { d * self.hi[j] };
        }
        let scale = 1.0 + primal.abs();
        debug_assert!(
            (primal - bound).abs() <= 1e-6 * scale,
            "duality gap at optimal basis: primal {primal}, dual {bound}"
        );
    }

    fn factorize(&self) -> std::result::Result<BasisFactor, Interrupt> {
        BasisFactor::new(
            self.sf.m,
            self.basis.iter().map(|&j| self.column(j)),
            self.opts.pivot_tol,
        )
        .map_err(|_| Interrupt::SingularBasis)
    }

    /// Recompute basic values from the nonbasic ones.
    fn refresh_basics(&mut self, factor: &BasisFactor) {
        let mut r = self.sf.rhs.clone();
        for j in 0..self.total_columns() {
            if !matches!(self.state[j], VarState::Basic(_)) && self.x[j] != 0.0 {
                for &(row, a) in self.column(j) {
                    r[row] -= a * self.x[j];
                }
            }
        }
        let xb = factor.solve(|p| self.column(self.basis[p]), &r);
        for (p, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[p];
        }
    }

    fn phase(&mut self) -> std::result::Result<PhaseEnd, Interrupt> {
        let m = self.sf.m;
        let mut degenerate_run = 0usize;
        let mut bland = false;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(Interrupt::IterationLimit);
            }
            if let Some(deadline) = self.deadline {
                if self.iterations.is_multiple_of(16) && Instant::now() >= deadline {
                    return Err(Interrupt::TimeLimit);
                }
            }
            let factor = self.factorize()?;
            self.refresh_basics(&factor);
            let cb: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
            let y = factor.solve_transpose(|p| self.column(self.basis[p]), &cb);

            // pricing
            let mut entering: Option<(usize, f64, f64)> = None; // (j, direction, |d|)
            for j in 0..self.total_columns() {
                let dir = match self.state[j] {
                    VarState::Basic(_) => continue,
                    _ if self.hi[j] - self.lo[j] <= 0.0 => continue,
                    VarState::AtLower => 1.0,
                    VarState::AtUpper => -1.0,
                };
                let mut d = self.cost[j];
                for &(r, a) in self.column(j) {
                    d -= a * y[r];
                }
                if d * dir < -self.opts.optimality_tol {
                    let mag = d.abs();
                    match entering {
                        None => entering = Some((j, dir, mag)),
                        Some((_, _, best)) if !bland && mag > best => entering = Some((j, dir, mag)),
                        _ => {}
                    }
                    if bland {
                        break;
                    }
                }
            }
            let Some((q, dir, _)) = entering else {
                return Ok(PhaseEnd::Optimal);
            };

            let mut aq = vec![0.0; m];
            for &(r, a) in self.column(q) {
                aq[r] = a;
            }
            let alpha = factor.solve(|p| self.column(self.basis[p]), &aq);

            // ratio test: basic p moves at rate -dir * alpha[p] per unit step
            let step_to_bound = |p: usize, slack_tol: f64| -> Option<f64> {
                let j = self.basis[p];
                let rate = -dir * alpha[p];
                if rate.abs() <= self.opts.pivot_tol {
                    return None;
                }
                if rate < 0.0 {
                    self.lo[j]
                        .is_finite()
                        .then(|| ((self.x[j] - self.lo[j]).max(0.0) + slack_tol) / -rate)
                } else {
                    self.hi[j]
                        .is_finite()
                        .then(|| ((self.hi[j] - self.x[j]).max(0.0) + slack_tol) / rate)
                }
            };

            let mut leaving: Option<usize> = None;
            let mut step = f64::INFINITY;
            if bland {
                for p in 0..m {
                    if let Some(t) = step_to_bound(p, 0.0) {
                        let take = match leaving {
                            None => true,
                            Some(l) => t < step - 1e-12 || (t <= step + 1e-12 && self.basis[p] < self.basis[l]),
                        };
                        if take {
                            leaving = Some(p);
                            step = t;
                        }
                    }
                }
            } else {
                // Harris two-pass: relaxed minimum, then the largest pivot within it
                let relaxed = (0..m)
                    .filter_map(|p| step_to_bound(p, self.opts.feasibility_tol))
                    .fold(f64::INFINITY, f64::min);
                if relaxed.is_finite() {
                    let mut best_pivot = 0.0;
                    for p in 0..m {
                        if let Some(t) = step_to_bound(p, 0.0) {
                            if t <= relaxed && alpha[p].abs() > best_pivot {
                                best_pivot = alpha[p].abs();
                                leaving = Some(p);
                                step = t;
                            }
                        }
                    }
                }
            }

            let flip = self.hi[q] - self.lo[q];
            self.iterations += 1;
            if flip.is_finite() && flip <= step {
                // bound flip, basis unchanged
                self.state[q] = if dir > 0.0 {
                    VarState::AtUpper
                } else {
                    VarState::AtLower
                };
                self.x[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
                degenerate_run = 0;
                bland = false;
                continue;
            }
            let Some(p) = leaving else {
                return Ok(PhaseEnd::Unbounded);
            };

            let out = self.basis[p];
            let rate = -dir * alpha[p];
            if rate < 0.0 {
                self.state[out] = VarState::AtLower;
                self.x[out] = self.lo[out];
            } else {
                self.state[out] = VarState::AtUpper;
                self.x[out] = self.hi[out];
            }
            self.x[q] += dir * step;
            self.state[q] = VarState::Basic(p);
            self.basis[p] = q;

            if step <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run > self.opts.degenerate_limit {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }
        }
    }
}
