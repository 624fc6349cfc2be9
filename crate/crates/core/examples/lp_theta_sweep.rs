//! Sweep the LP constraint fraction theta and watch the current spread out
//! as more constraint points are allowed above threshold.

use dbs_steer::cloud::{generate_synthetic_stn, voxel_downsample, SyntheticSpec};
use dbs_steer::field::build_transfer_matrix;
use dbs_steer::lead::{builtin_model, place_lead};
use dbs_steer::program::{optimize, OptimizeOptions};
use dbs_steer::{FieldModelConfig, Method, ProblemParams, StimulationProblem, Vec3};

fn main() -> dbs_steer::Result<()> {
    let model = builtin_model("boston_cartesia_8")?;
    let lead = place_lead(&model, Vec3::new(-0.8, 0.9, 0.0), Vec3::z(), 0.0)?;
    let cloud = voxel_downsample(&generate_synthetic_stn(5, &SyntheticSpec::stn_default())?.cloud, 0.95)?;
    let t = build_transfer_matrix(&lead, &FieldModelConfig::default(), &cloud.points)?;
    let problem = StimulationProblem::new(t, cloud, ProblemParams::default())?;
    println!(
        "{} targets, {} constraints",
        problem.cloud.n_targets(),
        problem.cloud.n_constraints()
    );
    println!(
        "theta  exempt  objective   beta   total_mA  {}",
        model.segment_labels.join("     ")
    );
    for theta in [0.0, 0.2, 0.4, 0.6, 0.8, 1.0] {
        let r = optimize(&problem.with_theta(theta), Method::Lp, &OptimizeOptions::default())?;
        let shares: Vec<String> = r.distribution.normalized.iter().map(|s| format!("{s:.2}")).collect();
        println!(
            "{theta:5.1}  {:6}  {:9.4}  {:.4}  {:8.3}  {}",
            r.exempted_constraint_ids.as_ref().map_or(0, Vec::len),
            r.objective,
            r.beta,
            r.distribution.total_ma(),
            shares.join("  ")
        );
    }
    Ok(())
}
