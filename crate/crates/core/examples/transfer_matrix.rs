//! Build a transfer matrix, superpose two current patterns, and check that
//! the activated volume is identical whether the field is computed directly
//! or by superposition.

use dbs_steer::cloud::{generate_synthetic_stn, SyntheticSpec};
use dbs_steer::field::{build_transfer_matrix, compute_vta, load_transfer_matrix, save_transfer_matrix, superpose};
use dbs_steer::lead::{builtin_model, place_lead};
use dbs_steer::metrics::dice;
use dbs_steer::{FieldModelConfig, Vec3};

fn main() -> dbs_steer::Result<()> {
    let cloud = generate_synthetic_stn(3, &SyntheticSpec::stn_default())?.cloud;
    let lead = place_lead(&builtin_model("abbott_infinity_8")?, Vec3::zeros(), Vec3::z(), 0.0)?;
    let config = FieldModelConfig::default();
    let t = build_transfer_matrix(&lead, &config, &cloud.points)?;
    println!(
        "transfer matrix: {} points x {} contacts",
        t.point_count(),
        t.contact_count()
    );

    let u = [0.0, 1.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0];
    let v = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5];
    let combined: Vec<f64> = u.iter().zip(&v).map(|(a, b)| 2.0 * a + 0.5 * b).collect();
    let direct = superpose(&t, &combined)?;
    let (yu, yv) = (superpose(&t, &u)?, superpose(&t, &v)?);
    let summed: Vec<f64> = yu.iter().zip(&yv).map(|(a, b)| 2.0 * a + 0.5 * b).collect();
    let max_err = direct
        .iter()
        .zip(&summed)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("max superposition error: {max_err:.2e} V/mm");

    let vta_direct = compute_vta(&direct, 0.2)?;
    let vta_summed = compute_vta(&summed, 0.2)?;
    println!(
        "activated points: {} of {}, dice(direct, superposed) = {}",
        vta_direct.count(),
        vta_direct.len(),
        dice(&vta_direct, &vta_summed)?
    );

    let dir = std::env::temp_dir().join("dbs_steer_transfer_example");
    std::fs::create_dir_all(&dir).map_err(|e| dbs_steer::Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let path = dir.join("transfer.csv");
    save_transfer_matrix(&t, &path)?;
    let back = load_transfer_matrix(&path)?;
    println!("round trip through {}: {} rows", path.display(), back.point_count());
    Ok(())
}
