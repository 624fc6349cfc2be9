//! Place both built-in leads and print contact centroids and segment normals.

use dbs_steer::lead::{builtin_model, place_lead, BUILTIN_MODELS};
use dbs_steer::Vec3;

fn main() -> dbs_steer::Result<()> {
    let tip = Vec3::new(10.0, -12.0, -4.0);
    let axis = Vec3::new(0.2, 0.1, 1.0);
    for id in BUILTIN_MODELS {
        let model = builtin_model(id)?;
        let lead = place_lead(&model, tip, axis, 30f64.to_radians())?;
        println!(
            "{id}: {} contacts, rows {:?}",
            lead.contact_count(),
            model.contact_rows()
        );
        for (p, label) in model.segment_labels.iter().enumerate() {
            let c = lead.contact_centroids[p];
            let normal = match lead.segment_normals[p] {
                Some(n) => format!("[{:+.3}, {:+.3}, {:+.3}]", n.x, n.y, n.z),
                None => "ring".into(),
            };
            println!(
                "  {p} {label:>3}  centroid [{:7.3}, {:7.3}, {:7.3}]  {normal}",
                c.x, c.y, c.z
            );
        }
    }
    Ok(())
}
