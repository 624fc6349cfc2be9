//! Targets far beyond reach of the lead: the MILP gives up on all of them
//! and the small current penalty drives every contact to zero.

use dbs_steer::cloud::{generate_synthetic_stn, SyntheticSpec};
use dbs_steer::field::build_transfer_matrix;
use dbs_steer::lead::{builtin_model, place_lead};
use dbs_steer::program::{optimize, OptimizeOptions};
use dbs_steer::{FieldModelConfig, Method, ProblemParams, StimulationProblem, Vec3};

fn main() -> dbs_steer::Result<()> {
    // nucleus scaled up and shifted so the nearest target is ~9 mm away
    let mut spec = SyntheticSpec::stn_scaled(1.0, [40, 30, 30]);
    for r in &mut spec.regions {
        r.center[0] += 12.0;
    }
    let cloud = generate_synthetic_stn(1, &spec)?.cloud;
    let lead = place_lead(&builtin_model("boston_cartesia_8")?, Vec3::zeros(), Vec3::z(), 0.0)?;
    let t = build_transfer_matrix(&lead, &FieldModelConfig::default(), &cloud.points)?;
    let problem = StimulationProblem::new(t, cloud, ProblemParams::default())?;

    let r = optimize(&problem, Method::Milp, &OptimizeOptions::default())?;
    println!("status {:?}", r.solver_stats.status);
    println!("currents {:?}", r.distribution.u_ma);
    println!("beta {}", r.beta);
    Ok(())
}
