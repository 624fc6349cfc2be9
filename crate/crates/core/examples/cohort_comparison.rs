//! Build LP and MILP cohort matrices for a few synthetic leads and tabulate
//! their pairwise Frobenius differences.

use dbs_steer::cloud::{generate_synthetic_stn, voxel_downsample, SyntheticSpec};
use dbs_steer::field::build_transfer_matrix;
use dbs_steer::lead::{builtin_model, place_lead};
use dbs_steer::metrics::{frobenius_diff, CohortMatrix};
use dbs_steer::program::{optimize, OptimizeOptions};
use dbs_steer::{FieldModelConfig, Method, ProblemParams, StimulationProblem, Vec3};

fn main() -> dbs_steer::Result<()> {
    let model = builtin_model("boston_cartesia_8")?;
    let placements = [
        ("p1_left", Vec3::new(0.0, 0.0, 0.0), 0.0),
        ("p1_right", Vec3::new(0.5, -0.4, 0.5), 1.1),
        ("p2_left", Vec3::new(-0.6, 0.3, -0.5), 2.3),
        ("p2_right", Vec3::new(0.2, 0.6, 0.0), 4.0),
    ];
    let thetas = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
    let mut lp_currents = vec![Vec::new(); thetas.len()];
    let mut milp_currents = Vec::new();
    let ids: Vec<String> = placements.iter().map(|p| p.0.to_string()).collect();
    let options = OptimizeOptions::default();

    for (seed, (_, tip, roll)) in placements.iter().enumerate() {
        let lead = place_lead(&model, *tip, Vec3::z(), *roll)?;
        let cloud = voxel_downsample(
            &generate_synthetic_stn(seed as u64, &SyntheticSpec::stn_default())?.cloud,
            1.4,
        )?;
        let t = build_transfer_matrix(&lead, &FieldModelConfig::default(), &cloud.points)?;
        let problem = StimulationProblem::new(t, cloud, ProblemParams::default())?;
        for (k, &theta) in thetas.iter().enumerate() {
            lp_currents[k].push(
                optimize(&problem.with_theta(theta), Method::Lp, &options)?
                    .distribution
                    .u_ma,
            );
        }
        milp_currents.push(optimize(&problem, Method::Milp, &options)?.distribution.u_ma);
    }

    let milp = CohortMatrix::from_currents(ids.clone(), &milp_currents)?;
    println!("theta  ||MILP - LP||_F");
    for (k, theta) in thetas.iter().enumerate() {
        let lp = CohortMatrix::from_currents(ids.clone(), &lp_currents[k])?;
        println!("{theta:5.1}  {:.4}", frobenius_diff(&milp, &lp)?);
    }
    Ok(())
}
