//! Downsample a synthetic nucleus at the benchmark voxel lengths.

use dbs_steer::cloud::{generate_synthetic_stn, voxel_downsample, SyntheticSpec};

fn main() -> dbs_steer::Result<()> {
    let generated = generate_synthetic_stn(11, &SyntheticSpec::stn_default())?;
    let cloud = &generated.cloud;
    println!(
        "input: {} targets, {} constraints ({} rejected overlaps)",
        cloud.n_targets(),
        cloud.n_constraints(),
        generated.overlap_count
    );
    println!("voxel_mm  targets  constraints");
    for v in [2.0, 1.4, 1.2, 1.0, 0.95, 0.9, 0.85, 0.8, 0.5, 1e-6] {
        let reduced = voxel_downsample(cloud, v)?;
        println!("{v:8}  {:7}  {:11}", reduced.n_targets(), reduced.n_constraints());
    }
    Ok(())
}
