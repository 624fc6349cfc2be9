//! Best-first branch-and-bound for linear programs with binary variables.
//!
//! Every node solves its LP relaxation from scratch with the node's binary
//! fixings applied as bounds. Open nodes are ordered by relaxation bound (ties
//! by creation order); branching picks the most fractional binary, lowest
//! index first. An integral relaxation becomes an incumbent candidate. There
//! are no cuts and no rounding heuristics, so the node count grows honestly
//! with problem size.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::lp::{Interrupt, LinearProgram, LpOptions, LpStatus, Sense, StandardForm};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MixedIntegerProgram {
    pub base: LinearProgram,
    /// Sorted, duplicate-free indices of the {0, 1} variables.
    pub binary_indices: Vec<usize>,
}

impl MixedIntegerProgram {
    pub fn new(base: LinearProgram, binary_indices: impl IntoIterator<Item = usize>) -> Self {
        let set: BTreeSet<usize> = binary_indices.into_iter().collect();
        Self {
            base,
            binary_indices: set.into_iter().collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        let n = self.base.num_vars();
        let mut last = None;
        for &j in &self.binary_indices {
            if j >= n {
                return Err(Error::Dimension(format!(
                    "binary index {j} out of range for {n} variables"
                )));
            }
            if last.is_some_and(|l| l >= j) {
                return Err(Error::InvalidArgument(
                    "binary indices must be sorted and unique".into(),
                ));
            }
            last = Some(j);
            let b = self.base.bounds[j];
            if b.lower < 0.0 || b.upper > 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "binary variable {j} has bounds [{}, {}] outside [0, 1]",
                    b.lower, b.upper
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpOptions {
    pub time_limit_s: f64,
    /// Absolute gap between incumbent and best open bound that counts as proven.
    pub gap_tol: f64,
    pub integrality_tol: f64,
    /// Secondary objective added to the primary one during the search.
    /// The reported objective excludes it.
    pub tie_break: Option<Vec<f64>>,
    pub lp: LpOptions,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self {
            time_limit_s: 1500.0,
            gap_tol: 1e-6,
            integrality_tol: 1e-6,
            tie_break: None,
            lp: LpOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MilpStatus {
    Optimal,
    FeasibleTimeLimit,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Best integral point found, binaries exactly 0 or 1. Empty without one.
    pub x: Vec<f64>,
    pub has_incumbent: bool,
    /// Primary objective at `x` in the program's own sense; NaN without incumbent.
    pub objective_value: f64,
    /// Root relaxation bound, in the program's own sense.
    pub root_bound: f64,
    pub nodes_explored: usize,
    pub lp_iterations: usize,
    /// Absolute distance between incumbent and best open bound; infinite
    /// without an incumbent.
    pub gap: f64,
    pub wall_time_s: f64,
}

struct OpenNode {
    bound: f64,
    id: u64,
    fixings: Vec<(usize, bool)>,
    branch_var: usize,
}

impl PartialEq for OpenNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenNode {}

impl PartialOrd for OpenNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OpenNode {
    // BinaryHeap pops the maximum: lowest bound first, then oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.id.cmp(&self.id))
    }
}

enum NodeResult {
    Infeasible,
    Unbounded,
    Solved { bound: f64, x: Vec<f64> },
}

struct Search<'a> {
    mip: &'a MixedIntegerProgram,
    options: &'a MilpOptions,
    sf: StandardForm,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// +1 for minimization, -1 for maximization; bounds are kept in min form.
    sign: f64,
    deadline: Instant,
    nodes: usize,
    lp_iterations: usize,
}

impl Search<'_> {
    fn evaluate(&mut self, fixings: &[(usize, bool)]) -> std::result::Result<NodeResult, Interrupt> {
        let mut lower = self.lower.clone();
        let mut upper = self.upper.clone();
        for &(j, v) in fixings {
            let v = if v { 1.0 } else { 0.0 };
            lower[j] = lower[j].max(v);
            upper[j] = upper[j].min(v);
        }
        self.nodes += 1;
        let sol = self.sf.solve(&lower, &upper, &self.options.lp, Some(self.deadline))?;
        self.lp_iterations += sol.iterations;
        Ok(match sol.status {
            LpStatus::Infeasible => NodeResult::Infeasible,
            LpStatus::Unbounded => NodeResult::Unbounded,
            LpStatus::Optimal => NodeResult::Solved {
                bound: self.sign * sol.objective_value,
                x: sol.x,
            },
        })
    }

    /// Most fractional binary, lowest index on ties; `None` if integral.
    fn branching_variable(&self, x: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &j in &self.mip.binary_indices {
            let frac = x[j] - x[j].floor();
            let dist = frac.min(1.0 - frac);
            if dist > self.options.integrality_tol && best.is_none_or(|(_, d)| dist > d) {
                best = Some((j, dist));
            }
        }
        best.map(|(j, _)| j)
    }
}

/// Solve `mip` by best-first branch-and-bound.
pub fn solve_milp(mip: &MixedIntegerProgram, options: &MilpOptions) -> Result<MilpSolution> {
    mip.validate()?;
    let start = Instant::now();
    let n = mip.base.num_vars();

    let mut search_lp = mip.base.clone();
    if let Some(extra) = &options.tie_break {
        if extra.len() != n {
            return Err(Error::Dimension(format!(
                "tie-break vector has {} entries for {n} variables",
                extra.len()
            )));
        }
        for (c, e) in search_lp.objective.iter_mut().zip(extra) {
            *c += e;
        }
    }
    let limit = Duration::try_from_secs_f64(options.time_limit_s.max(0.0)).unwrap_or(Duration::MAX);
    let deadline = start
        .checked_add(limit)
        .unwrap_or_else(|| start + Duration::from_secs(u32::MAX as u64));
    let mut search = Search {
        mip,
        options,
        sf: StandardForm::new(&search_lp),
        lower: mip.base.bounds.iter().map(|b| b.lower).collect(),
        upper: mip.base.bounds.iter().map(|b| b.upper).collect(),
        sign: match mip.base.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        },
        deadline,
        nodes: 0,
        lp_iterations: 0,
    };
    let sign = search.sign;

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut open = BinaryHeap::new();
    let mut next_id = 0u64;
    let mut timed_out = false;
    // bound of a node whose children were cut short by the time limit
    let mut orphan_bound = f64::INFINITY;

    let mut offer = |search: &Search,
                     incumbent: &mut Option<(f64, Vec<f64>)>,
                     open: &mut BinaryHeap<OpenNode>,
                     fixings: Vec<(usize, bool)>,
                     bound: f64,
                     x: Vec<f64>| {
        match search.branching_variable(&x) {
            None => {
                if incumbent.as_ref().is_none_or(|(best, _)| bound < *best) {
                    let mut x = x;
                    for &j in &mip.binary_indices {
                        x[j] = x[j].round();
                    }
                    *incumbent = Some((bound, x));
                }
            }
            Some(branch_var) => {
                if incumbent
                    .as_ref()
                    .is_none_or(|(best, _)| bound < best - options.gap_tol)
                {
                    open.push(OpenNode {
                        bound,
                        id: next_id,
                        fixings,
                        branch_var,
                    });
                    next_id += 1;
                }
            }
        }
    };

    let root_bound = match search.evaluate(&[]) {
        Err(Interrupt::TimeLimit) => {
            return Ok(MilpSolution {
                status: MilpStatus::FeasibleTimeLimit,
                x: Vec::new(),
                has_incumbent: false,
                objective_value: f64::NAN,
                root_bound: f64::NAN,
                nodes_explored: search.nodes,
                lp_iterations: search.lp_iterations,
                gap: f64::INFINITY,
                wall_time_s: start.elapsed().as_secs_f64(),
            })
        }
        Err(e) => return Err(e.into_error()),
        Ok(NodeResult::Unbounded) => return Err(Error::Solver("LP relaxation is unbounded".into())),
        Ok(NodeResult::Infeasible) => {
            return Ok(MilpSolution {
                status: MilpStatus::Infeasible,
                x: Vec::new(),
                has_incumbent: false,
                objective_value: f64::NAN,
                root_bound: f64::NAN,
                nodes_explored: search.nodes,
                lp_iterations: search.lp_iterations,
                gap: f64::INFINITY,
                wall_time_s: start.elapsed().as_secs_f64(),
            })
        }
        Ok(NodeResult::Solved { bound, x }) => {
            offer(&search, &mut incumbent, &mut open, Vec::new(), bound, x);
            bound
        }
    };

    'search: while let Some(node) = open.pop() {
        if let Some((best, _)) = &incumbent {
            if node.bound >= best - options.gap_tol {
                open.push(node);
                break;
            }
        }
        if Instant::now() >= deadline {
            open.push(node);
            timed_out = true;
            break;
        }
        for value in [false, true] {
            let mut fixings = node.fixings.clone();
            fixings.push((node.branch_var, value));
            match search.evaluate(&fixings) {
                Err(Interrupt::TimeLimit) => {
                    timed_out = true;
                    orphan_bound = node.bound;
                    break 'search;
                }
                Err(e) => return Err(e.into_error()),
                Ok(NodeResult::Infeasible) => {}
                Ok(NodeResult::Unbounded) => return Err(Error::Solver("LP relaxation is unbounded".into())),
                Ok(NodeResult::Solved { bound, x }) => {
                    debug_assert!(
                        bound >= node.bound - 1e-9 * (1.0 + node.bound.abs()),
                        "child bound {bound} better than parent {}",
                        node.bound
                    );
                    offer(&search, &mut incumbent, &mut open, fixings, bound, x);
                }
            }
        }
    }

    let open_bound = open.peek().map_or(f64::INFINITY, |n| n.bound).min(orphan_bound);
    let wall_time_s = start.elapsed().as_secs_f64();
    let (status, x, objective_value, gap) = match incumbent {
        Some((best, x)) => {
            let gap = if open_bound.is_finite() {
                (best - open_bound).max(0.0)
            } else {
                0.0
            };
            let status = if timed_out && gap > options.gap_tol {
                MilpStatus::FeasibleTimeLimit
            } else {
                MilpStatus::Optimal
            };
            let objective = mip.base.objective_value(&x);
            (status, x, objective, gap)
        }
        None if timed_out => (MilpStatus::FeasibleTimeLimit, Vec::new(), f64::NAN, f64::INFINITY),
        None => (MilpStatus::Infeasible, Vec::new(), f64::NAN, f64::INFINITY),
    };
    Ok(MilpSolution {
        status,
        has_incumbent: !x.is_empty(),
        x,
        objective_value,
        root_bound: sign * root_bound,
        nodes_explored: search.nodes,
        lp_iterations: search.lp_iterations,
        gap,
        wall_time_s,
    })
}
