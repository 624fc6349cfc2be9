//! Solve the indicator MILP and compare its inconsistency with the LP.

use dbs_steer::cloud::{generate_synthetic_stn, voxel_downsample, SyntheticSpec};
use dbs_steer::field::build_transfer_matrix;
use dbs_steer::lead::{builtin_model, place_lead};
use dbs_steer::program::{optimize, OptimizeOptions};
use dbs_steer::{FieldModelConfig, Method, ProblemParams, StimulationProblem, Vec3};

fn main() -> dbs_steer::Result<()> {
    let model = builtin_model("boston_cartesia_8")?;
    let lead = place_lead(&model, Vec3::new(0.3, -0.2, 0.0), Vec3::new(0.1, 0.0, 1.0), 0.4)?;
    let cloud = voxel_downsample(&generate_synthetic_stn(21, &SyntheticSpec::stn_default())?.cloud, 1.2)?;
    let t = build_transfer_matrix(&lead, &FieldModelConfig::default(), &cloud.points)?;
    let problem = StimulationProblem::new(t, cloud, ProblemParams::default())?;
    let mut options = OptimizeOptions::default();
    options.milp.time_limit_s = 60.0;

    let milp = optimize(&problem, Method::Milp, &options)?;
    let s = &milp.solver_stats;
    println!(
        "milp: status {:?}, {} nodes, {:.3} s, beta {:.4} ({} of {} targets missed, {} of {} constraints activated)",
        s.status,
        s.nodes.unwrap_or(0),
        s.wall_time_s,
        milp.beta,
        milp.counts.targets_missed,
        milp.counts.n_targets,
        milp.counts.constraints_activated,
        milp.counts.n_constraints
    );
    for theta in [0.0, 0.6, 1.0] {
        let lp = optimize(&problem.with_theta(theta), Method::Lp, &options)?;
        println!(
            "lp theta {theta}: beta {:.4}, {:.5} s",
            lp.beta, lp.solver_stats.wall_time_s
        );
    }
    println!("milp currents (mA):");
    for (label, u) in model.segment_labels.iter().zip(&milp.distribution.u_ma) {
        println!("  {label:>3}  {u:.3}");
    }
    Ok(())
}
