//! Time LP and MILP across a voxel-length sweep and print the benchmark CSV.
//!
//! Pass a MILP time limit in seconds as the first argument (default 30).

use dbs_steer::cloud::{generate_synthetic_stn, SyntheticSpec};
use dbs_steer::lead::{builtin_model, place_lead};
use dbs_steer::metrics::{run_benchmark, write_bench_csv, BenchOptions};
use dbs_steer::{FieldModelConfig, Method, Vec3};

fn main() -> dbs_steer::Result<()> {
    let limit: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(30.0);
    let spec = SyntheticSpec::stn_scaled(2.0, [2250, 1500, 1500]);
    let cloud = generate_synthetic_stn(7, &spec)?.cloud;
    let lead = place_lead(&builtin_model("boston_cartesia_8")?, Vec3::zeros(), Vec3::z(), 0.3)?;
    let mut options = BenchOptions::default();
    options.solver.milp.time_limit_s = limit;
    let records = run_benchmark(
        &cloud,
        &lead,
        &FieldModelConfig::default(),
        &[1.8, 1.5, 1.3, 1.15, 1.0, 0.9, 0.8],
        &[Method::Lp, Method::Milp],
        &options,
    )?;
    write_bench_csv(&records, std::io::stdout())
}
