//! Directional lead models and their placement in the working frame.
//!
//! Both built-in leads share the 1-3-3-1 layout: a distal ring, two rows of
//! three 120° segments, and a proximal ring. Contact indices follow one fixed
//! order everywhere in the crate: distal ring = 0, then each row moving away
//! from the tip, segments in A, B, C order.

use std::f64::consts::PI;

use nalgebra::{Rotation3, Unit};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec3};

/// Length of one contact along the lead axis.
pub const CONTACT_LENGTH_MM: f64 = 1.5;
/// Insulated gap between consecutive contact rows.
pub const CONTACT_SPACING_MM: f64 = 0.5;
/// Outer lead diameter.
pub const LEAD_DIAMETER_MM: f64 = 1.3;

/// Tip-to-distal-contact insulation, Boston Scientific Vercise Cartesia.
const BOSTON_TIP_OFFSET_MM: f64 = 1.1;
/// Tip-to-distal-contact insulation, Abbott Infinity.
const ABBOTT_TIP_OFFSET_MM: f64 = 1.0;

pub const BUILTIN_MODELS: [&str; 2] = ["boston_cartesia_8", "abbott_infinity_8"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Ring,
    Segmented3,
}

impl RowKind {
    pub fn contact_count(self) -> usize {
        match self {
            RowKind::Ring => 1,
            RowKind::Segmented3 => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub kind: RowKind,
    /// Distance from the lead tip to the row centre along the axis.
    pub offset_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadModel {
    pub model_id: String,
    pub contact_count: usize,
    pub rows: Vec<Row>,
    /// One label per contact, in contact order.
    pub segment_labels: Vec<String>,
    pub contact_length_mm: f64,
    pub lead_diameter_mm: f64,
}

impl LeadModel {
    /// Row index of every contact, in contact order.
    pub fn contact_rows(&self) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| std::iter::repeat_n(r, row.kind.contact_count()))
            .collect()
    }

    pub fn is_segmented(&self, contact: usize) -> bool {
        self.contact_rows()
            .get(contact)
            .map(|&r| self.rows[r].kind == RowKind::Segmented3)
            .unwrap_or(false)
    }
}

fn one_three_three_one(model_id: &str, tip_offset: f64, labels: [&str; 8]) -> LeadModel {
    let pitch = CONTACT_LENGTH_MM + CONTACT_SPACING_MM;
    let kinds = [RowKind::Ring, RowKind::Segmented3, RowKind::Segmented3, RowKind::Ring];
    let rows = kinds
        .iter()
        .enumerate()
        .map(|(i, &kind)| Row {
            kind,
            offset_mm: tip_offset + 0.5 * CONTACT_LENGTH_MM + i as f64 * pitch,
        })
        .collect();
    LeadModel {
        model_id: model_id.to_string(),
        contact_count: 8,
        rows,
        segment_labels: labels.iter().map(|s| s.to_string()).collect(),
        contact_length_mm: CONTACT_LENGTH_MM,
        lead_diameter_mm: LEAD_DIAMETER_MM,
    }
}

/// Look up one of the built-in eight-contact directional leads.
pub fn builtin_model(model_id: &str) -> Result<LeadModel> {
    match model_id {
        "boston_cartesia_8" => Ok(one_three_three_one(
            model_id,
            BOSTON_TIP_OFFSET_MM,
            ["1", "2A", "2B", "2C", "3A", "3B", "3C", "4"],
        )),
        "abbott_infinity_8" => Ok(one_three_three_one(
            model_id,
            ABBOTT_TIP_OFFSET_MM,
            ["0", "1A", "1B", "1C", "2A", "2B", "2C", "3"],
        )),
        other => Err(Error::UnknownLeadModel(other.to_string())),
    }
}

/// A lead model positioned in the working frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LeadInstance {
    pub model: LeadModel,
    pub tip_position: Vec3,
    pub axis_direction: Vec3,
    pub roll_angle: f64,
    /// Contact centres on the lead axis, in contact order.
    pub contact_centroids: Vec<Vec3>,
    /// Outward normal of each segment; `None` for ring contacts.
    pub segment_normals: Vec<Option<Vec3>>,
}

impl LeadInstance {
    pub fn contact_count(&self) -> usize {
        self.model.contact_count
    }
}

/// Unit vector perpendicular to `axis` that marks segment A at zero roll.
fn reference_normal(axis: &Vec3) -> Vec3 {
    let x = Vec3::x();
    let seed = if x.dot(axis).abs() > 0.9 { Vec3::y() } else { x };
    (seed - axis * seed.dot(axis)).normalize()
}

/// Place `model` with its tip at `tip`, pointing along `axis`, with segment A
/// rotated by `roll` radians about the axis.
pub fn place_lead(model: &LeadModel, tip: Vec3, axis: Vec3, roll: f64) -> Result<LeadInstance> {
    let norm = axis.norm();
    if !(norm.is_finite() && norm > 1e-12) {
        return Err(Error::InvalidPlacement("axis vector must be nonzero".into()));
    }
    if !tip.iter().all(|c| c.is_finite()) || !roll.is_finite() {
        return Err(Error::InvalidPlacement("tip and roll must be finite".into()));
    }
    let axis = axis / norm;
    let unit_axis = Unit::new_unchecked(axis);
    let reference = reference_normal(&axis);

    let mut centroids = Vec::with_capacity(model.contact_count);
    let mut normals = Vec::with_capacity(model.contact_count);
    for row in &model.rows {
        let centre = tip + axis * row.offset_mm;
        match row.kind {
            RowKind::Ring => {
                centroids.push(centre);
                normals.push(None);
            }
            RowKind::Segmented3 => {
                for s in 0..3 {
                    let angle = roll + s as f64 * 2.0 * PI / 3.0;
                    let rot = Rotation3::from_axis_angle(&unit_axis, angle);
                    centroids.push(centre);
                    normals.push(Some((rot * reference).normalize()));
                }
            }
        }
    }
    if centroids.len() != model.contact_count {
        return Err(Error::InvalidPlacement(format!(
            "model `{}` declares {} contacts but its rows hold {}",
            model.model_id,
            model.contact_count,
            centroids.len()
        )));
    }
    Ok(LeadInstance {
        model: model.clone(),
        tip_position: tip,
        axis_direction: axis,
        roll_angle: roll,
        contact_centroids: centroids,
        segment_normals: normals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical(roll: f64) -> LeadInstance {
        let model = builtin_model("boston_cartesia_8").unwrap();
        place_lead(&model, Vec3::zeros(), Vec3::z(), roll).unwrap()
    }

    #[test]
    fn builtin_layouts() {
        for id in BUILTIN_MODELS {
            let m = builtin_model(id).unwrap();
            let kinds: Vec<_> = m.rows.iter().map(|r| r.kind).collect();
            assert_eq!(
                kinds,
                vec![RowKind::Ring, RowKind::Segmented3, RowKind::Segmented3, RowKind::Ring]
            );
            let sum: usize = m.rows.iter().map(|r| r.kind.contact_count()).sum();
            assert_eq!(sum, m.contact_count);
            assert_eq!(m.contact_count, 8);
            assert_eq!(m.segment_labels.len(), 8);
        }
    }

    #[test]
    fn abbott_middle_rows_have_segment_suffixes() {
        let m = builtin_model("abbott_infinity_8").unwrap();
        for (i, label) in m.segment_labels.iter().enumerate() {
            let suffix = label.chars().last().unwrap();
            if m.is_segmented(i) {
                assert!("ABC".contains(suffix), "{label}");
            } else {
                assert!(suffix.is_ascii_digit(), "{label}");
            }
        }
        assert_eq!(&m.segment_labels[1..4], &["1A", "1B", "1C"]);
    }

    #[test]
    fn unknown_model_is_rejected() {
        assert!(matches!(
            builtin_model("vercise_x_16"),
            Err(Error::UnknownLeadModel(id)) if id == "vercise_x_16"
        ));
    }

    #[test]
    fn zero_axis_is_rejected() {
        let model = builtin_model("boston_cartesia_8").unwrap();
        assert!(matches!(
            place_lead(&model, Vec3::zeros(), Vec3::zeros(), 0.0),
            Err(Error::InvalidPlacement(_))
        ));
    }

    #[test]
    fn canonical_placement_is_on_z_axis_ascending() {
        let lead = canonical(0.0);
        let mut last = f64::NEG_INFINITY;
        for c in &lead.contact_centroids {
            assert!(c.x.abs() < 1e-12 && c.y.abs() < 1e-12);
            assert!(c.z >= last);
            last = c.z;
        }
        assert!(lead.contact_centroids[0].z < lead.contact_centroids[7].z);
    }

    #[test]
    fn roll_is_periodic() {
        let a = canonical(0.0);
        let b = canonical(2.0 * PI);
        for (na, nb) in a.segment_normals.iter().zip(&b.segment_normals) {
            match (na, nb) {
                (Some(x), Some(y)) => assert!((x - y).norm() < 1e-9),
                (None, None) => {}
                _ => panic!("ring/segment mismatch"),
            }
        }
    }

    #[test]
    fn third_turn_maps_a_onto_b() {
        let base = canonical(0.0);
        let turned = canonical(2.0 * PI / 3.0);
        // contacts 1..4 are row one, 4..7 row two
        for row_start in [1, 4] {
            let a_turned = turned.segment_normals[row_start].unwrap();
            let b_base = base.segment_normals[row_start + 1].unwrap();
            assert!((a_turned - b_base).norm() < 1e-9);
        }
    }

    #[test]
    fn third_turn_permutes_row_normals_cyclically() {
        let base = canonical(0.3);
        let turned = canonical(0.3 + 2.0 * PI / 3.0);
        for row_start in [1, 4] {
            for s in 0..3 {
                let t = turned.segment_normals[row_start + s].unwrap();
                let b = base.segment_normals[row_start + (s + 1) % 3].unwrap();
                assert!((t - b).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn normals_are_perpendicular_unit_vectors() {
        let model = builtin_model("abbott_infinity_8").unwrap();
        let axis = Vec3::new(0.3, -0.5, 0.8);
        let lead = place_lead(&model, Vec3::new(1.0, 2.0, 3.0), axis, 1.1).unwrap();
        assert!((lead.axis_direction.norm() - 1.0).abs() < 1e-9);
        for n in lead.segment_normals.iter().flatten() {
            assert!((n.norm() - 1.0).abs() < 1e-9);
            assert!(n.dot(&lead.axis_direction).abs() < 1e-9);
        }
        // segments within a row sit 120 degrees apart
        let a = lead.segment_normals[1].unwrap();
        let b = lead.segment_normals[2].unwrap();
        assert!((a.dot(&b) - (2.0 * PI / 3.0).cos()).abs() < 1e-9);
    }

    #[test]
    fn consecutive_row_distances_match_offsets() {
        let model = builtin_model("boston_cartesia_8").unwrap();
        let lead = place_lead(&model, Vec3::new(-1.0, 4.0, 2.0), Vec3::new(1.0, 1.0, 0.2), 0.7).unwrap();
        let rows = model.contact_rows();
        for i in 0..8 {
            for j in 0..8 {
                if rows[j] == rows[i] + 1 {
                    let expected = model.rows[rows[j]].offset_mm - model.rows[rows[i]].offset_mm;
                    let d = (lead.contact_centroids[j] - lead.contact_centroids[i]).norm();
                    assert!((d - expected).abs() < 1e-9);
                }
            }
        }
    }
}
