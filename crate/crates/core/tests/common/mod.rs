//! Brute-force oracles and random instance generators shared by the
//! integration tests.

#![allow(dead_code)]

use dbs_steer::cloud::{generate_synthetic_stn, voxel_downsample, SyntheticSpec};
use dbs_steer::field::build_transfer_matrix;
use dbs_steer::lead::{builtin_model, place_lead};
use dbs_steer::lp::{solve_lp, Relation, Sense, VarBounds};
use dbs_steer::program::ProblemParams;
use dbs_steer::{FieldModelConfig, Label, LinearProgram, LpOptions, LpSolution, LpStatus, StimulationProblem, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Best objective over all feasible vertices, `None` if no vertex is
/// feasible. Every variable must have finite bounds.
pub fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    let mut planes: Vec<(Vec<f64>, f64)> = lp.constraints.iter().map(|c| (c.coefficients.clone(), c.rhs)).collect();
    for (j, b) in lp.bounds.iter().enumerate() {
        assert!(b.lower.is_finite() && b.upper.is_finite(), "oracle needs a bounded box");
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), b.lower));
        planes.push((e, b.upper));
    }
    let mut best: Option<f64> = None;
    let mut pick = Vec::with_capacity(n);
    combinations(planes.len(), n, 0, &mut pick, &mut |idx| {
        let Some(x) = solve_square(idx.iter().map(|&k| &planes[k]).collect()) else {
            return;
        };
        if lp.max_violation(&x) > 1e-7 {
            return;
        }
        let v = lp.objective_value(&x);
        let better = match (best, lp.sense) {
            (None, _) => true,
            (Some(b), Sense::Minimize) => v < b,
            (Some(b), Sense::Maximize) => v > b,
        };
        if better {
            best = Some(v);
        }
    });
    best
}

fn combinations(total: usize, k: usize, start: usize, pick: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if pick.len() == k {
        f(pick);
        return;
    }
    for i in start..total {
        if total - i < k - pick.len() {
            break;
        }
        pick.push(i);
        combinations(total, k, i + 1, pick, f);
        pick.pop();
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_square(rows: Vec<&(Vec<f64>, f64)>) -> Option<Vec<f64>> {
    let n = rows.len();
    let mut a: Vec<Vec<f64>> = rows
        .iter()
        .map(|(c, b)| {
            let mut r = c.clone();
            r.push(*b);
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(piv, col);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    let pivot_row = a[col].clone();
                    for (x, p) in a[r][col..].iter_mut().zip(&pivot_row[col..]) {
                        *x -= f * p;
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

/// Lagrangian dual bound from the reported duals. For an optimal solve it
/// must agree with the primal objective.
pub fn dual_bound(lp: &LinearProgram, sol: &LpSolution) -> f64 {
    let maximize = lp.sense == Sense::Maximize;
    // reduced costs of structurals and of each row's slack
    let mut bound: f64 = lp.constraints.iter().zip(&sol.duals).map(|(c, y)| c.rhs * y).sum();
    let mut add = |d: f64, lo: f64, hi: f64| {
        if d.abs() <= 1e-9 {
            return;
        }
        let favourable_low = (d > 0.0) != maximize;
        bound += d * if favourable_low { lo } else { hi };
    };
    for j in 0..lp.num_vars() {
        let col: f64 = lp
            .constraints
            .iter()
            .zip(&sol.duals)
            .map(|(c, y)| c.coefficients[j] * y)
            .sum();
        add(lp.objective[j] - col, lp.bounds[j].lower, lp.bounds[j].upper);
    }
    for (c, y) in lp.constraints.iter().zip(&sol.duals) {
        let (lo, hi) = match c.relation {
            Relation::Le => (0.0, f64::INFINITY),
            Relation::Ge => (f64::NEG_INFINITY, 0.0),
            Relation::Eq => (0.0, 0.0),
        };
        add(-y, lo, hi);
    }
    bound
}

pub fn random_lp(rng: &mut ChaCha8Rng) -> LinearProgram {
    let n = rng.gen_range(1..=6);
    let m = rng.gen_range(1..=5);
    let coef = |rng: &mut ChaCha8Rng| -> f64 {
        match rng.gen_range(0..10) {
            0 | 1 => 0.0,
            2 | 3 => (rng.gen_range(-8..=8) as f64) * 0.5,
            _ => rng.gen_range(-4.0..4.0),
        }
    };
    let sense = if rng.gen_bool(0.5) {
        Sense::Minimize
    } else {
        Sense::Maximize
    };
    let objective = (0..n).map(|_| coef(rng)).collect();
    let bounds: Vec<VarBounds> = (0..n)
        .map(|_| {
            let lo = if rng.gen_bool(0.5) {
                0.0
            } else {
                rng.gen_range(-3.0..0.0)
            };
            VarBounds::new(lo, lo + rng.gen_range(0.5..5.0))
        })
        .collect();
    let anchor: Vec<f64> = bounds.iter().map(|b| rng.gen_range(b.lower..=b.upper)).collect();
    let feasible = rng.gen_bool(0.85);
    let mut lp = LinearProgram::new(sense, objective).with_bounds(bounds);
    for _ in 0..m {
        let a: Vec<f64> = (0..n).map(|_| coef(rng)).collect();
        let at: f64 = a.iter().zip(&anchor).map(|(x, y)| x * y).sum();
        let relation = match rng.gen_range(0..20) {
            0..=11 => Relation::Le,
            12..=16 => Relation::Ge,
            _ => Relation::Eq,
        };
        let rhs = if feasible {
            // tight rows make degenerate vertices common
            let slack = if rng.gen_bool(0.3) {
                0.0
            } else {
                rng.gen_range(0.0..3.0)
            };
            match relation {
                Relation::Le => at + slack,
                Relation::Ge => at - slack,
                Relation::Eq => at,
            }
        } else {
            rng.gen_range(-10.0..10.0)
        };
        lp.add_constraint(a, relation, rhs);
    }
    lp
}

/// Exhaustive MILP optimum for a stimulation problem: for each assignment of
/// indicators, the cheapest current that honours the non-relaxed rows.
pub fn enumerate_indicators(problem: &StimulationProblem) -> f64 {
    let p = &problem.params;
    let n = problem.contact_count();
    let targets = problem.cloud.indices_of(Label::Target);
    let constraints = problem.cloud.indices_of(Label::Constraint);
    let (nt, nc) = (targets.len(), constraints.len());
    let k = nt + nc;
    assert!(k <= 16, "too many indicators to enumerate");
    let eps = 1e-6 / (n as f64 * p.i_max_contact_ma);
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << k) {
        let relaxed_t = (0..nt).filter(|&b| mask >> b & 1 == 1).count();
        let relaxed_c = (nt..k).filter(|&b| mask >> b & 1 == 1).count();
        let mut cost = 0.0;
        if nt > 0 {
            cost += relaxed_t as f64 / nt as f64;
        }
        if nc > 0 {
            cost += relaxed_c as f64 / nc as f64;
        }
        if cost >= best {
            continue;
        }
        let mut lp =
            LinearProgram::new(Sense::Minimize, vec![eps; n])
                .with_bounds(vec![VarBounds::new(0.0, p.i_max_contact_ma); n]);
        lp.add_constraint(vec![1.0; n], Relation::Le, p.i_max_total_ma);
        for (b, &i) in targets.iter().enumerate() {
            if mask >> b & 1 == 0 {
                lp.add_constraint(problem.transfer.row(i).to_vec(), Relation::Ge, p.e_th_t);
            }
        }
        for (b, &j) in constraints.iter().enumerate() {
            if mask >> (nt + b) & 1 == 0 {
                lp.add_constraint(problem.transfer.row(j).to_vec(), Relation::Le, p.e_th_c);
            }
        }
        let sol = solve_lp(&lp, &LpOptions::default()).unwrap();
        if sol.status == LpStatus::Optimal {
            best = best.min(cost + sol.objective_value);
        }
    }
    best
}

/// Synthetic nucleus around a randomly perturbed lead.
pub fn synthetic_problem(
    seed: u64,
    scale: f64,
    counts: [usize; 3],
    voxel_mm: f64,
    params: ProblemParams,
) -> StimulationProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let spec = SyntheticSpec::stn_scaled(scale, counts);
    let cloud = generate_synthetic_stn(seed, &spec).unwrap().cloud;
    let cloud = voxel_downsample(&cloud, voxel_mm).unwrap();
    let model = if rng.gen_bool(0.5) {
        "boston_cartesia_8"
    } else {
        "abbott_infinity_8"
    };
    let tip = Vec3::new(
        rng.gen_range(-1.5..1.5),
        rng.gen_range(-1.0..1.5),
        rng.gen_range(-1.0..1.0),
    );
    let axis = Vec3::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2), 1.0);
    let lead = place_lead(
        &builtin_model(model).unwrap(),
        tip,
        axis,
        rng.gen_range(0.0..std::f64::consts::TAU),
    )
    .unwrap();
    let t = build_transfer_matrix(&lead, &FieldModelConfig::default(), &cloud.points).unwrap();
    StimulationProblem::new(t, cloud, params).unwrap()
}
