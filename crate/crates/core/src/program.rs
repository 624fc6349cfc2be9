//! Stimulation problems and their LP / MILP formulations.
//!
//! Variable layout is shared by both formulations: the first `N_contacts`
//! variables are the contact currents `u` in mA. The MILP appends one binary
//! per target point and then one per constraint point, in cloud order.

use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::lp::{solve_lp, LinearProgram, LpOptions, LpSolution, LpStatus, Relation, Sense, VarBounds};
use crate::milp::{solve_milp, MilpOptions, MilpStatus, MixedIntegerProgram};
use crate::{Error, Label, LabeledCloud, Result, TransferMatrix};

/// Slack allowed when deciding whether a point sits above its threshold.
pub const ACTIVATION_TOL: f64 = 1e-9;

/// Thresholds, safety limits, and the LP constraint fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemParams {
    /// Target activation threshold, V/mm.
    pub e_th_t: f64,
    /// Constraint threshold, V/mm.
    pub e_th_c: f64,
    pub i_max_contact_ma: f64,
    pub i_max_total_ma: f64,
    /// Fraction of constraint points the LP keeps below threshold.
    pub theta: f64,
}

impl Default for ProblemParams {
    fn default() -> Self {
        Self {
            e_th_t: 0.2,
            e_th_c: 0.2,
            i_max_contact_ma: 5.0,
            i_max_total_ma: 8.0,
            theta: 1.0,
        }
    }
}

impl ProblemParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidArgument(format!("theta {} outside [0, 1]", self.theta)));
        }
        if !(self.e_th_t > 0.0 && self.e_th_t.is_finite() && self.e_th_c > 0.0 && self.e_th_c.is_finite()) {
            return Err(Error::InvalidArgument("thresholds must be positive and finite".into()));
        }
        if !(self.i_max_contact_ma > 0.0
            && self.i_max_contact_ma <= self.i_max_total_ma
            && self.i_max_total_ma.is_finite())
        {
            return Err(Error::InvalidArgument(format!(
                "current limits need 0 < per-contact ({}) <= total ({})",
                self.i_max_contact_ma, self.i_max_total_ma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StimulationProblem {
    pub transfer: TransferMatrix,
    /// Row-aligned with `transfer`.
    pub cloud: LabeledCloud,
    pub params: ProblemParams,
}

impl StimulationProblem {
    pub fn new(transfer: TransferMatrix, cloud: LabeledCloud, params: ProblemParams) -> Result<Self> {
        let problem = Self {
            transfer,
            cloud,
            params,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.transfer.point_count() != self.cloud.len() {
            return Err(Error::Dimension(format!(
                "transfer matrix has {} rows but the cloud has {} points",
                self.transfer.point_count(),
                self.cloud.len()
            )));
        }
        Ok(())
    }

    pub fn contact_count(&self) -> usize {
        self.transfer.contact_count()
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        let mut p = self.clone();
        p.params.theta = theta;
        p
    }

    /// Field at every point for currents `u`.
    pub fn fields(&self, u: &[f64]) -> Vec<f64> {
        self.transfer
            .rows()
            .map(|row| row.iter().zip(u).map(|(t, c)| t * c).sum())
            .collect()
    }

    fn target_objective(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.contact_count()];
        for i in self.cloud.indices_of(Label::Target) {
            for (cp, t) in c.iter_mut().zip(self.transfer.row(i)) {
                *cp += t;
            }
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lp,
    Milp,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lp" => Ok(Method::Lp),
            "milp" => Ok(Method::Milp),
            other => Err(Error::InvalidArgument(format!(
                "unknown method '{other}' (expected lp or milp)"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Lp => "lp",
            Method::Milp => "milp",
        })
    }
}

/// Non-negative per-contact currents that respect the safety limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentDistribution {
    pub u_ma: Vec<f64>,
    /// `u / sum(u)`, all zeros when no current flows.
    pub normalized: Vec<f64>,
}

impl CurrentDistribution {
    pub fn zeros(contacts: usize) -> Self {
        Self {
            u_ma: vec![0.0; contacts],
            normalized: vec![0.0; contacts],
        }
    }

    /// Clamp `raw` into `[0, i_max_contact]` and scale down if the total is exceeded.
    pub fn project(raw: &[f64], params: &ProblemParams) -> Self {
        let mut u: Vec<f64> = raw
            .iter()
            .map(|&v| {
                if v.is_finite() {
                    v.clamp(0.0, params.i_max_contact_ma)
                } else {
                    0.0
                }
            })
            .collect();
        let total: f64 = u.iter().sum();
        if total > params.i_max_total_ma {
            let s = params.i_max_total_ma / total;
            for v in &mut u {
                *v *= s;
            }
        }
        let total: f64 = u.iter().sum();
        let normalized = if total > 0.0 {
            u.iter().map(|v| v / total).collect()
        } else {
            vec![0.0; u.len()]
        };
        Self { u_ma: u, normalized }
    }

    pub fn total_ma(&self) -> f64 {
        self.u_ma.iter().sum()
    }

    pub fn is_safe(&self, params: &ProblemParams) -> bool {
        self.u_ma
            .iter()
            .all(|&v| (0.0..=params.i_max_contact_ma + 1e-9).contains(&v))
            && self.total_ma() <= params.i_max_total_ma + 1e-9
    }
}

/// Activation counts for one current distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivationCounts {
    pub n_targets: usize,
    pub targets_missed: usize,
    pub n_constraints: usize,
    pub constraints_activated: usize,
}

impl ActivationCounts {
    /// Inconsistency; a label with no points contributes nothing.
    pub fn beta(&self) -> f64 {
        let frac = |k: usize, n: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
        0.5 * (frac(self.targets_missed, self.n_targets) + frac(self.constraints_activated, self.n_constraints))
    }
}

/// Threshold the field `T u`: a target counts as reached at `>= e_th_t`, a
/// constraint as activated only strictly above `e_th_c`.
pub fn activation_counts(problem: &StimulationProblem, u: &[f64]) -> ActivationCounts {
    let y = problem.fields(u);
    let p = &problem.params;
    let mut counts = ActivationCounts {
        n_targets: 0,
        targets_missed: 0,
        n_constraints: 0,
        constraints_activated: 0,
    };
    for (v, label) in y.iter().zip(&problem.cloud.labels) {
        match label {
            Label::Target => {
                counts.n_targets += 1;
                if *v < p.e_th_t - ACTIVATION_TOL {
                    counts.targets_missed += 1;
                }
            }
            Label::Constraint => {
                counts.n_constraints += 1;
                if *v > p.e_th_c + ACTIVATION_TOL {
                    counts.constraints_activated += 1;
                }
            }
        }
    }
    counts
}

/// LP for one `theta`, with the constraint points it exempts.
#[derive(Debug, Clone)]
pub struct LpFormulation {
    pub program: LinearProgram,
    /// Exempted cloud indices, highest field first.
    pub exempted: Vec<usize>,
    /// Solution with every constraint row enforced.
    pub full_solution: LpSolution,
}

/// Number of constraint points exempted at `theta`.
pub fn exemption_count(theta: f64, n_constraints: usize) -> usize {
    let raw = (1.0 - theta) * n_constraints as f64;
    ((raw - 1e-9).ceil().max(0.0) as usize).min(n_constraints)
}

fn lp_program(problem: &StimulationProblem, enforced: &[usize]) -> LinearProgram {
    let n = problem.contact_count();
    let p = &problem.params;
    let mut lp = LinearProgram::new(Sense::Maximize, problem.target_objective()).with_bounds(vec![
        VarBounds::new(
            0.0,
            p.i_max_contact_ma
        );
        n
    ]);
    lp.add_constraint(vec![1.0; n], Relation::Le, p.i_max_total_ma);
    for &j in enforced {
        lp.add_constraint(problem.transfer.row(j).to_vec(), Relation::Le, p.e_th_c);
    }
    lp
}

/// Build the LP at the problem's `theta`.
///
/// The exempted points are chosen greedily: solve with every constraint row,
/// rank constraint points by the field that solution produces, and drop the
/// `ceil((1 - theta) N_c)` highest.
pub fn build_lp(problem: &StimulationProblem, options: &LpOptions) -> Result<LpFormulation> {
    problem.validate()?;
    if problem.cloud.n_targets() == 0 {
        return Err(Error::InvalidArgument("the LP needs at least one target point".into()));
    }
    let constraints = problem.cloud.indices_of(Label::Constraint);
    let full = lp_program(problem, &constraints);
    let full_solution = solve_lp(&full, options)?;
    if full_solution.status != LpStatus::Optimal {
        return Err(Error::Solver(format!(
            "full LP ended with status {:?}",
            full_solution.status
        )));
    }
    let k = exemption_count(problem.params.theta, constraints.len());
    if k == 0 {
        return Ok(LpFormulation {
            program: full,
            exempted: Vec::new(),
            full_solution,
        });
    }
    let y = problem.fields(&full_solution.x);
    let mut ranked = constraints.clone();
    ranked.sort_by(|&a, &b| y[b].total_cmp(&y[a]).then(a.cmp(&b)));
    let exempted: Vec<usize> = ranked[..k].to_vec();
    let mut is_exempt = vec![false; problem.cloud.len()];
    for &j in &exempted {
        is_exempt[j] = true;
    }
    let enforced: Vec<usize> = constraints.into_iter().filter(|&j| !is_exempt[j]).collect();
    Ok(LpFormulation {
        program: lp_program(problem, &enforced),
        exempted,
        full_solution,
    })
}

/// Big-M for a constraint row: the largest field the safety limits allow,
/// minus the threshold.
fn constraint_big_m(row: &[f64], params: &ProblemParams) -> f64 {
    let max_t = row.iter().fold(0.0f64, |m, &t| m.max(t));
    (params.i_max_total_ma * max_t - params.e_th_c).max(1e-9)
}

/// Build the indicator MILP. Binary `d_i = 1` marks a target allowed to stay
/// below threshold; `d_j = 1` marks a constraint point allowed above it.
pub fn build_milp(problem: &StimulationProblem) -> Result<MixedIntegerProgram> {
    problem.validate()?;
    let n = problem.contact_count();
    let p = &problem.params;
    let targets = problem.cloud.indices_of(Label::Target);
    let constraints = problem.cloud.indices_of(Label::Constraint);
    let (nt, nc) = (targets.len(), constraints.len());
    let vars = n + nt + nc;

    let eps = 1e-6 / (n as f64 * p.i_max_contact_ma);
    let mut objective = vec![eps; n];
    objective.extend(std::iter::repeat_n(1.0 / nt as f64, nt));
    objective.extend(std::iter::repeat_n(1.0 / nc as f64, nc));
    let mut bounds = vec![VarBounds::new(0.0, p.i_max_contact_ma); n];
    bounds.extend(std::iter::repeat_n(VarBounds::BINARY, nt + nc));
    let mut lp = LinearProgram::new(Sense::Minimize, objective).with_bounds(bounds);

    for (k, &i) in targets.iter().enumerate() {
        let mut row = vec![0.0; vars];
        row[..n].copy_from_slice(problem.transfer.row(i));
        row[n + k] = p.e_th_t;
        lp.add_constraint(row, Relation::Ge, p.e_th_t);
    }
    for (k, &j) in constraints.iter().enumerate() {
        let t = problem.transfer.row(j);
        let mut row = vec![0.0; vars];
        row[..n].copy_from_slice(t);
        row[n + nt + k] = -constraint_big_m(t, p);
        lp.add_constraint(row, Relation::Le, p.e_th_c);
    }
    let mut total = vec![0.0; vars];
    total[..n].fill(1.0);
    lp.add_constraint(total, Relation::Le, p.i_max_total_ma);

    Ok(MixedIntegerProgram::new(lp, n..vars))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizeOptions {
    pub lp: LpOptions,
    pub milp: MilpOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    /// Time limit reached; see `has_incumbent`.
    TimeLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub status: SolveStatus,
    pub has_incumbent: bool,
    /// Simplex iterations summed over every LP solved.
    pub iterations: usize,
    /// Branch-and-bound nodes (MILP only).
    pub nodes: Option<usize>,
    pub gap: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub method: Method,
    pub theta: Option<f64>,
    pub distribution: CurrentDistribution,
    pub beta: f64,
    pub counts: ActivationCounts,
    /// Solver objective in the formulation's own sense.
    pub objective: f64,
    pub solver_stats: SolverStats,
    pub exempted_constraint_ids: Option<Vec<String>>,
}

/// Build, solve, decode, and score one problem.
pub fn optimize(problem: &StimulationProblem, method: Method, options: &OptimizeOptions) -> Result<OptimizationReport> {
    let report = match method {
        Method::Lp => optimize_lp(problem, &options.lp)?,
        Method::Milp => optimize_milp(problem, &options.milp)?,
    };
    assert!(
        report.distribution.is_safe(&problem.params),
        "current distribution violates the safety limits: {:?}",
        report.distribution.u_ma
    );
    Ok(report)
}

fn optimize_lp(problem: &StimulationProblem, options: &LpOptions) -> Result<OptimizationReport> {
    let start = Instant::now();
    let form = build_lp(problem, options)?;
    let (solution, iterations) = if form.exempted.is_empty() {
        (form.full_solution.clone(), form.full_solution.iterations)
    } else {
        let s = solve_lp(&form.program, options)?;
        let it = s.iterations + form.full_solution.iterations;
        (s, it)
    };
    let wall_time_s = start.elapsed().as_secs_f64();
    if solution.status != LpStatus::Optimal {
        return Err(Error::Solver(format!("LP ended with status {:?}", solution.status)));
    }
    let distribution = CurrentDistribution::project(&solution.x, &problem.params);
    let counts = activation_counts(problem, &distribution.u_ma);
    let ids = problem.transfer.point_ids();
    Ok(OptimizationReport {
        method: Method::Lp,
        theta: Some(problem.params.theta),
        beta: counts.beta(),
        counts,
        distribution,
        objective: solution.objective_value,
        solver_stats: SolverStats {
            status: SolveStatus::Optimal,
            has_incumbent: true,
            iterations,
            nodes: None,
            gap: None,
            wall_time_s,
        },
        exempted_constraint_ids: Some(form.exempted.iter().map(|&j| ids[j].clone()).collect()),
    })
}

fn optimize_milp(problem: &StimulationProblem, options: &MilpOptions) -> Result<OptimizationReport> {
    let start = Instant::now();
    let mip = build_milp(problem)?;
    let sol = solve_milp(&mip, options)?;
    let wall_time_s = start.elapsed().as_secs_f64();
    let n = problem.contact_count();
    let status = match sol.status {
        MilpStatus::Optimal => SolveStatus::Optimal,
        MilpStatus::Infeasible => SolveStatus::Infeasible,
        MilpStatus::FeasibleTimeLimit => SolveStatus::TimeLimit,
    };
    let (distribution, counts) = if sol.has_incumbent {
        let distribution = CurrentDistribution::project(&sol.x[..n], &problem.params);
        let nt = problem.cloud.n_targets();
        let d = &sol.x[n..];
        let counts = ActivationCounts {
            n_targets: nt,
            targets_missed: d[..nt].iter().filter(|&&v| v == 1.0).count(),
            n_constraints: d.len() - nt,
            constraints_activated: d[nt..].iter().filter(|&&v| v == 1.0).count(),
        };
        (distribution, counts)
    } else {
        let distribution = CurrentDistribution::zeros(n);
        let counts = activation_counts(problem, &distribution.u_ma);
        (distribution, counts)
    };
    Ok(OptimizationReport {
        method: Method::Milp,
        theta: None,
        beta: counts.beta(),
        counts,
        distribution,
        objective: sol.objective_value,
        solver_stats: SolverStats {
            status,
            has_incumbent: sol.has_incumbent,
            iterations: sol.lp_iterations,
            nodes: Some(sol.nodes_explored),
            gap: Some(sol.gap),
            wall_time_s,
        },
        exempted_constraint_ids: None,
    })
}
