mod common;

use dbs_steer::lp::{solve_lp, Relation, Sense, VarBounds};
use dbs_steer::{LinearProgram, LpOptions, LpStatus, MilpOptions, MilpStatus, MixedIntegerProgram};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_mip(rng: &mut ChaCha8Rng) -> MixedIntegerProgram {
    let n_cont = rng.gen_range(0..=3);
    let n_bin = rng.gen_range(1..=12);
    let n = n_cont + n_bin;
    let sense = if rng.gen_bool(0.5) {
        Sense::Minimize
    } else {
        Sense::Maximize
    };
    let objective = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let mut bounds = vec![VarBounds::BINARY; n];
    for b in &mut bounds[..n_cont] {
        *b = VarBounds::new(0.0, rng.gen_range(1.0..4.0));
    }
    let mut lp = LinearProgram::new(sense, objective).with_bounds(bounds);
    for _ in 0..rng.gen_range(1..=6) {
        let a: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.3) {
                    0.0
                } else {
                    rng.gen_range(-3.0..3.0)
                }
            })
            .collect();
        let rel = if rng.gen_bool(0.7) { Relation::Le } else { Relation::Ge };
        let mid: f64 = a.iter().map(|v| v * 0.5).sum();
        lp.add_constraint(a, rel, mid + rng.gen_range(-2.0..2.0));
    }
    MixedIntegerProgram::new(lp, n_cont..n)
}

fn enumerate(mip: &MixedIntegerProgram) -> Option<f64> {
    let bins = &mip.binary_indices;
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << bins.len()) {
        let mut lp = mip.base.clone();
        for (k, &j) in bins.iter().enumerate() {
            let v = (mask >> k & 1) as f64;
            lp.bounds[j] = VarBounds::new(v, v);
        }
        let sol = solve_lp(&lp, &LpOptions::default()).unwrap();
        if sol.status == LpStatus::Optimal {
            let v = sol.objective_value;
            best = Some(match (best, lp.sense) {
                (None, _) => v,
                (Some(b), Sense::Minimize) => b.min(v),
                (Some(b), Sense::Maximize) => b.max(v),
            });
        }
    }
    best
}

#[test]
fn random_programs_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for k in 0..150 {
        let mip = random_mip(&mut rng);
        let sol = dbs_steer::milp::solve_milp(&mip, &MilpOptions::default()).unwrap();
        match enumerate(&mip) {
            None => assert_eq!(sol.status, MilpStatus::Infeasible, "instance {k}"),
            Some(best) => {
                assert_eq!(sol.status, MilpStatus::Optimal, "instance {k}");
                assert!(
                    (sol.objective_value - best).abs() <= 1e-6,
                    "instance {k}: {} vs {best}",
                    sol.objective_value
                );
                for &j in &mip.binary_indices {
                    assert!(sol.x[j] == 0.0 || sol.x[j] == 1.0);
                }
                assert!(mip.base.max_violation(&sol.x) <= 1e-6);
                // the root relaxation bounds the integer optimum
                let slack = 1e-6;
                match mip.base.sense {
                    Sense::Minimize => assert!(sol.objective_value >= sol.root_bound - slack),
                    Sense::Maximize => assert!(sol.objective_value <= sol.root_bound + slack),
                }
            }
        }
    }
}

#[test]
fn repeated_solves_are_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let mip = random_mip(&mut rng);
        let a = dbs_steer::milp::solve_milp(&mip, &MilpOptions::default()).unwrap();
        let b = dbs_steer::milp::solve_milp(&mip, &MilpOptions::default()).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.nodes_explored, b.nodes_explored);
    }
}

#[test]
fn random_lps_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(9001);
    for k in 0..200 {
        let lp = common::random_lp(&mut rng);
        let sol = solve_lp(&lp, &LpOptions::default()).unwrap();
        match common::vertex_enumeration(&lp) {
            None => assert_eq!(sol.status, LpStatus::Infeasible, "lp {k}"),
            Some(best) => {
                assert_eq!(sol.status, LpStatus::Optimal, "lp {k}");
                assert!((sol.objective_value - best).abs() <= 1e-6, "lp {k}");
                let dual = common::dual_bound(&lp, &sol);
                assert!(
                    (dual - sol.objective_value).abs() <= 1e-6 * (1.0 + best.abs()),
                    "lp {k}: dual {dual}"
                );
            }
        }
    }
}
