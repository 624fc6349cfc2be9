mod common;

use dbs_steer::cloud::{generate_synthetic_stn, SyntheticSpec};
use dbs_steer::field::build_transfer_matrix;
use dbs_steer::lead::{builtin_model, place_lead};
use dbs_steer::program::{activation_counts, optimize, OptimizeOptions, SolveStatus};
use dbs_steer::{FieldModelConfig, Label, LabeledCloud, Method, ProblemParams, StimulationProblem, Vec3};

#[test]
fn coincident_targets_and_constraints_leave_lp_near_half() {
    let base = generate_synthetic_stn(4, &SyntheticSpec::stn_scaled(1.0, [60, 1, 1]))
        .unwrap()
        .cloud;
    let targets: Vec<Vec3> = base.indices_of(Label::Target).iter().map(|&i| base.points[i]).collect();
    let mut points = targets.clone();
    points.extend(targets.iter().map(|p| p + Vec3::new(0.0, 1e-3, 0.0)));
    let mut labels = vec![Label::Target; targets.len()];
    labels.extend(vec![Label::Constraint; targets.len()]);
    let cloud = LabeledCloud::new(points, labels).unwrap();
    let lead = place_lead(
        &builtin_model("abbott_infinity_8").unwrap(),
        Vec3::zeros(),
        Vec3::z(),
        0.0,
    )
    .unwrap();
    let t = build_transfer_matrix(&lead, &FieldModelConfig::default(), &cloud.points).unwrap();
    let problem = StimulationProblem::new(t, cloud, ProblemParams::default()).unwrap();
    let r = optimize(&problem, Method::Lp, &OptimizeOptions::default()).unwrap();
    assert!(r.beta > 0.4 && r.beta <= 0.5 + 1e-12, "beta {}", r.beta);
}

#[test]
fn milp_never_worse_than_lp_at_any_theta() {
    for seed in 0..6 {
        let problem = common::synthetic_problem(300 + seed, 1.0, [60, 40, 40], 1.6, ProblemParams::default());
        let milp = optimize(&problem, Method::Milp, &OptimizeOptions::default()).unwrap();
        assert_eq!(milp.solver_stats.status, SolveStatus::Optimal);
        for theta in [0.0, 0.2, 0.4, 0.6, 0.8, 1.0] {
            let lp = optimize(&problem.with_theta(theta), Method::Lp, &OptimizeOptions::default()).unwrap();
            assert!(milp.beta <= lp.beta + 1e-9);
            assert_eq!(lp.beta, activation_counts(&problem, &lp.distribution.u_ma).beta());
        }
    }
}

#[test]
fn reports_serialize_round_trip() {
    let problem = common::synthetic_problem(2, 1.0, [30, 20, 20], 2.0, ProblemParams::default());
    let r = optimize(&problem.with_theta(0.6), Method::Lp, &OptimizeOptions::default()).unwrap();
    let json = serde_json::to_string(&r).unwrap();
    let back: dbs_steer::OptimizationReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, r);
    assert!(json.contains("\"method\":\"lp\""));
}
