//! Per-unit-current field model, transfer matrices and activation masks.
//!
//! The field of a single contact driven at 1 mA is approximated by a point
//! source in an infinite homogeneous medium, `E = I / (4 pi sigma r^2)`. With
//! `r` in mm and `sigma` in S/m the mA/mm scaling cancels and the result is
//! directly in V/mm. Segmented contacts additionally carry a normalized
//! cardioid gain `(1 + kappa cos phi) / (1 + kappa)` around their outward
//! normal. Any non-negative field model would do: the optimizers only consume
//! the transfer matrix, which can also be loaded from CSV.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lead::LeadInstance;
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldModelConfig {
    pub conductivity_s_per_m: f64,
    pub directional_gain_kappa: f64,
    pub min_distance_mm: f64,
}

impl Default for FieldModelConfig {
    fn default() -> Self {
        Self {
            conductivity_s_per_m: 0.2,
            directional_gain_kappa: 1.0,
            min_distance_mm: 0.5,
        }
    }
}

impl FieldModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.conductivity_s_per_m.is_finite() && self.conductivity_s_per_m > 0.0) {
            return Err(Error::InvalidArgument("conductivity must be > 0".into()));
        }
        if !(self.directional_gain_kappa.is_finite() && self.directional_gain_kappa >= 0.0) {
            return Err(Error::InvalidArgument("directional gain kappa must be >= 0".into()));
        }
        if !(self.min_distance_mm.is_finite() && self.min_distance_mm > 0.0) {
            return Err(Error::InvalidArgument("min_distance_mm must be > 0".into()));
        }
        Ok(())
    }
}

/// Field norm (V/mm) at `point` when `contact_index` alone carries 1 mA.
///
/// Panics if `contact_index` is out of range for the lead.
pub fn unit_field_norm(lead: &LeadInstance, config: &FieldModelConfig, contact_index: usize, point: &Vec3) -> f64 {
    let offset = point - lead.contact_centroids[contact_index];
    let distance = offset.norm();
    let r = distance.max(config.min_distance_mm);
    let monopole = 1.0 / (4.0 * PI * config.conductivity_s_per_m * r * r);
    match lead.segment_normals[contact_index] {
        None => monopole,
        Some(normal) => {
            let cos_phi = if distance > 0.0 {
                (normal.dot(&offset) / distance).clamp(-1.0, 1.0)
            } else {
                1.0
            };
            let kappa = config.directional_gain_kappa;
            // kappa > 1 would go negative behind the segment
            monopole * (1.0 + kappa * cos_phi).max(0.0) / (1.0 + kappa)
        }
    }
}

/// Field norms per unit current: one row per point, one column per contact.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    values: Vec<f64>,
    point_ids: Vec<String>,
    contact_count: usize,
}

impl TransferMatrix {
    /// Build from row-major values. Every entry must be finite and >= 0.
    pub fn from_rows(point_ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let contact_count = rows.first().map(Vec::len).unwrap_or(0);
        if rows.len() != point_ids.len() {
            return Err(Error::Dimension(format!(
                "{} rows but {} point ids",
                rows.len(),
                point_ids.len()
            )));
        }
        let mut values = Vec::with_capacity(rows.len() * contact_count);
        for (k, row) in rows.iter().enumerate() {
            if row.len() != contact_count {
                return Err(Error::Dimension(format!(
                    "row {k} has {} entries, expected {contact_count}",
                    row.len()
                )));
            }
            for (p, &v) in row.iter().enumerate() {
                check_entry(k, p, v)?;
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            values,
            point_ids,
            contact_count,
        })
    }

    pub fn point_count(&self) -> usize {
        self.point_ids.len()
    }

    pub fn contact_count(&self) -> usize {
        self.contact_count
    }

    pub fn point_ids(&self) -> &[String] {
        &self.point_ids
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.contact_count..(k + 1) * self.contact_count]
    }

    pub fn get(&self, k: usize, p: usize) -> f64 {
        self.values[k * self.contact_count + p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.contact_count.max(1))
    }

    pub fn column(&self, p: usize) -> Vec<f64> {
        self.rows().map(|r| r[p]).collect()
    }

    /// Keep only the listed rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> TransferMatrix {
        let mut values = Vec::with_capacity(indices.len() * self.contact_count);
        let mut ids = Vec::with_capacity(indices.len());
        for &k in indices {
            values.extend_from_slice(self.row(k));
            ids.push(self.point_ids[k].clone());
        }
        TransferMatrix {
            values,
            point_ids: ids,
            contact_count: self.contact_count,
        }
    }
}

fn check_entry(row: usize, contact: usize, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::Validation {
            row,
            column: format!("c{contact}"),
            message: format!("transfer entries must be finite and non-negative, got {v}"),
        });
    }
    Ok(())
}

/// Evaluate the unit field of every contact at every point.
pub fn build_transfer_matrix(
    lead: &LeadInstance,
    config: &FieldModelConfig,
    points: &[Vec3],
) -> Result<TransferMatrix> {
    if points.is_empty() {
        return Err(Error::InvalidArgument(
            "transfer matrix needs at least one point".into(),
        ));
    }
    config.validate()?;
    let n = lead.contact_count();
    let values: Vec<f64> = points
        .par_iter()
        .flat_map_iter(|pt| (0..n).map(move |p| unit_field_norm(lead, config, p, pt)))
        .collect();
    Ok(TransferMatrix {
        values,
        point_ids: (0..points.len()).map(|k| k.to_string()).collect(),
        contact_count: n,
    })
}

/// Read a transfer matrix CSV with header `point_id,c0,...,c{N-1}`.
pub fn load_transfer_matrix(path: impl AsRef<Path>) -> Result<TransferMatrix> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::parse(path, 0, e.to_string()))?;
    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(|e| Error::parse(path, 1, e.to_string()))?,
        None => return Err(Error::parse(path, 1, "missing header")),
    };
    let contact_count = header.len().saturating_sub(1);
    let header_ok = header.get(0) == Some("point_id")
        && contact_count > 0
        && header.iter().skip(1).enumerate().all(|(p, h)| h == format!("c{p}"));
    if !header_ok {
        return Err(Error::parse(path, 1, "missing header `point_id,c0,...,c{N-1}`"));
    }

    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (k, rec) in records.enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::parse(path, line, e.to_string()))?;
        if rec.len() != contact_count + 1 {
            return Err(Error::parse(
                path,
                line,
                format!("expected {} fields, found {}", contact_count + 1, rec.len()),
            ));
        }
        ids.push(rec[0].to_string());
        for p in 0..contact_count {
            let v: f64 = rec[p + 1]
                .parse()
                .map_err(|_| Error::parse(path, line, format!("bad number `{}` in column c{p}", &rec[p + 1])))?;
            check_entry(k, p, v)?;
            values.push(v);
        }
    }
    if ids.is_empty() {
        return Err(Error::parse(path, 2, "no data rows"));
    }
    Ok(TransferMatrix {
        values,
        point_ids: ids,
        contact_count,
    })
}

/// Write the CSV format read by [`load_transfer_matrix`], 12 significant digits.
pub fn save_transfer_matrix(matrix: &TransferMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str("point_id");
    for p in 0..matrix.contact_count {
        out.push_str(&format!(",c{p}"));
    }
    out.push('\n');
    for (k, id) in matrix.point_ids.iter().enumerate() {
        out.push_str(id);
        for &v in matrix.row(k) {
            out.push_str(&format!(",{v:.11e}"));
        }
        out.push('\n');
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Superposed field `T u` for per-contact currents `u` (mA).
pub fn superpose(matrix: &TransferMatrix, currents: &[f64]) -> Result<Vec<f64>> {
    if currents.len() != matrix.contact_count {
        return Err(Error::Dimension(format!(
            "current vector has {} entries, transfer matrix has {} contacts",
            currents.len(),
            matrix.contact_count
        )));
    }
    Ok(matrix
        .rows()
        .take(matrix.point_count())
        .map(|row| row.iter().zip(currents).map(|(t, u)| t * u).sum())
        .collect())
}

/// Points whose field reaches the activation threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationMask {
    pub bits: Vec<bool>,
    pub threshold: f64,
}

impl ActivationMask {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Threshold a field: point `k` is active iff `field[k] >= threshold`.
pub fn compute_vta(field: &[f64], threshold: f64) -> Result<ActivationMask> {
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "activation threshold must be > 0, got {threshold}"
        )));
    }
    Ok(ActivationMask {
        bits: field.iter().map(|&e| e >= threshold).collect(),
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lead::{builtin_model, place_lead};
    use proptest::prelude::*;

    fn lead() -> LeadInstance {
        let model = builtin_model("boston_cartesia_8").unwrap();
        place_lead(&model, Vec3::zeros(), Vec3::z(), 0.0).unwrap()
    }

    #[test]
    fn ring_monopole_at_one_mm() {
        let lead = lead();
        let cfg = FieldModelConfig::default();
        let p = lead.contact_centroids[0] + Vec3::new(1.0, 0.0, 0.0);
        let e = unit_field_norm(&lead, &cfg, 0, &p);
        // 1e-3 A / (4 pi 0.2 S/m (1e-3 m)^2) = 397.887 V/m
        let expected = 1e-3 / (4.0 * PI * 0.2 * 1e-6) / 1e3;
        assert!((e - expected).abs() < 1e-12);
        assert!((e - 0.3979).abs() < 1e-4);
    }

    #[test]
    fn inverse_square() {
        let lead = lead();
        let cfg = FieldModelConfig::default();
        let c = lead.contact_centroids[7];
        let e1 = unit_field_norm(&lead, &cfg, 7, &(c + Vec3::new(0.0, 1.0, 0.0)));
        let e2 = unit_field_norm(&lead, &cfg, 7, &(c + Vec3::new(0.0, 2.0, 0.0)));
        assert!(((e1 / 4.0) - e2).abs() / e2 < 1e-12);
    }

    #[test]
    fn segment_peak_is_monopole() {
        let lead = lead();
        let cfg = FieldModelConfig::default();
        let n = lead.segment_normals[2].unwrap();
        let p = lead.contact_centroids[2] + n * 1.7;
        let ring_like = 1.0 / (4.0 * PI * 0.2 * 1.7 * 1.7);
        assert!((unit_field_norm(&lead, &cfg, 2, &p) - ring_like).abs() < 1e-15);
        // opposite side is fully suppressed at kappa = 1
        let back = lead.contact_centroids[2] - n * 1.7;
        assert!(unit_field_norm(&lead, &cfg, 2, &back).abs() < 1e-15);
    }

    #[test]
    fn near_points_are_clamped() {
        let lead = lead();
        let cfg = FieldModelConfig::default();
        let at = unit_field_norm(&lead, &cfg, 0, &lead.contact_centroids[0]);
        let close = unit_field_norm(&lead, &cfg, 0, &(lead.contact_centroids[0] + Vec3::new(0.1, 0.0, 0.0)));
        assert!(at.is_finite());
        assert_eq!(at, close);
    }

    #[test]
    fn transfer_shape_and_symmetry() {
        let lead = lead();
        let cfg = FieldModelConfig::default();
        let t = build_transfer_matrix(&lead, &cfg, &[Vec3::new(1.0, 2.0, 3.0)]).unwrap();
        assert_eq!((t.point_count(), t.contact_count()), (1, 8));
        assert!(t.row(0).iter().all(|&v| v > 0.0));

        let pts = [Vec3::new(1.5, 0.7, 4.0), Vec3::new(-1.5, -0.7, 4.0)];
        let t = build_transfer_matrix(&lead, &cfg, &pts).unwrap();
        for ring in [0, 7] {
            assert!((t.get(0, ring) - t.get(1, ring)).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_points_rejected() {
        assert!(build_transfer_matrix(&lead(), &FieldModelConfig::default(), &[]).is_err());
    }

    #[test]
    fn permuted_points_permute_rows() {
        let lead = lead();
        let cfg = FieldModelConfig::default();
        let pts: Vec<Vec3> = (0..5)
            .map(|i| Vec3::new(i as f64 * 0.7 - 1.0, 1.0, 0.5 + i as f64))
            .collect();
        let perm = [3, 0, 4, 1, 2];
        let permuted: Vec<Vec3> = perm.iter().map(|&i| pts[i]).collect();
        let a = build_transfer_matrix(&lead, &cfg, &pts).unwrap();
        let b = build_transfer_matrix(&lead, &cfg, &permuted).unwrap();
        for (k, &src) in perm.iter().enumerate() {
            assert_eq!(a.row(src), b.row(k));
        }
    }

    #[test]
    fn superpose_cases() {
        let lead = lead();
        let cfg = FieldModelConfig::default();
        let pts: Vec<Vec3> = (0..6).map(|i| Vec3::new(1.0, i as f64 * 0.3, i as f64)).collect();
        let t = build_transfer_matrix(&lead, &cfg, &pts).unwrap();
        assert!(superpose(&t, &[0.0; 8]).unwrap().iter().all(|&v| v == 0.0));
        let mut unit = [0.0; 8];
        unit[3] = 1.0;
        assert_eq!(superpose(&t, &unit).unwrap(), t.column(3));

        let mut two = [0.0; 8];
        two[0] = 1.0;
        two[1] = 1.0;
        let y = superpose(&t, &two).unwrap();
        for (k, yk) in y.iter().enumerate() {
            let acc = t.get(k, 0) + t.get(k, 1);
            assert!((yk - acc).abs() < 1e-15);
        }
        assert!(matches!(superpose(&t, &[1.0; 3]), Err(Error::Dimension(_))));
    }

    #[test]
    fn vta_thresholding() {
        let m = compute_vta(&[0.3, 0.2, 0.1], 0.2).unwrap();
        assert_eq!(m.bits, vec![true, true, false]);
        assert_eq!(compute_vta(&[0.3, 0.2, 0.1], 0.31).unwrap().count(), 0);
        assert!(compute_vta(&[0.3], 0.0).is_err());
        assert!(compute_vta(&[0.3], -1.0).is_err());
    }

    #[test]
    fn csv_errors() {
        let dir = tempfile::tempdir().unwrap();
        let neg = dir.path().join("neg.csv");
        std::fs::write(&neg, "point_id,c0,c1\na,0.1,0.2\nb,-0.1,0.3\n").unwrap();
        match load_transfer_matrix(&neg) {
            Err(Error::Validation { row, column, .. }) => {
                assert_eq!(row, 1);
                assert_eq!(column, "c0");
            }
            other => panic!("expected validation error, got {other:?}"),
        }

        let ragged = dir.path().join("ragged.csv");
        std::fs::write(&ragged, "point_id,c0,c1\na,0.1,0.2\nb,0.3\n").unwrap();
        assert!(matches!(
            load_transfer_matrix(&ragged),
            Err(Error::Parse { line: 3, .. })
        ));

        let headless = dir.path().join("headless.csv");
        std::fs::write(&headless, "a,0.1,0.2\nb,0.3,0.4\n").unwrap();
        assert!(matches!(
            load_transfer_matrix(&headless),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn csv_well_formed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut text = String::from("point_id,c0,c1,c2,c3,c4,c5,c6,c7\n");
        for k in 0..3 {
            text.push_str(&format!("p{k}"));
            for p in 0..8 {
                text.push_str(&format!(",{}", 0.01 * (k * 8 + p) as f64));
            }
            text.push('\n');
        }
        std::fs::write(&path, text).unwrap();
        let t = load_transfer_matrix(&path).unwrap();
        assert_eq!((t.point_count(), t.contact_count()), (3, 8));
        assert_eq!(t.point_ids()[2], "p2");
        assert!((t.get(2, 7) - 0.23).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn save_load_round_trip(rows in prop::collection::vec(prop::collection::vec(0.0f64..50.0, 8), 1..20)) {
            let ids = (0..rows.len()).map(|k| format!("pt{k}")).collect();
            let t = TransferMatrix::from_rows(ids, rows).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("rt.csv");
            save_transfer_matrix(&t, &path).unwrap();
            let back = load_transfer_matrix(&path).unwrap();
            prop_assert_eq!(back.point_ids(), t.point_ids());
            for k in 0..t.point_count() {
                for p in 0..8 {
                    let (a, b) = (t.get(k, p), back.get(k, p));
                    // 12 significant digits
                    prop_assert!((a - b).abs() <= 5e-12 * a.abs().max(1e-300));
                }
            }
        }

        #[test]
        fn vta_monotone_in_threshold(field in prop::collection::vec(0.0f64..2.0, 1..60), lo in 0.01f64..1.0, step in 0.0f64..1.0) {
            let a = compute_vta(&field, lo).unwrap();
            let b = compute_vta(&field, lo + step).unwrap();
            prop_assert!(b.count() <= a.count());
            for (x, y) in a.bits.iter().zip(&b.bits) {
                prop_assert!(!*y || *x);
            }
        }

        #[test]
        fn entries_finite_nonnegative(px in -10.0f64..10.0, py in -10.0f64..10.0, pz in -5.0f64..15.0, roll in 0.0f64..6.3, kappa in 0.0f64..5.0) {
            let model = builtin_model("abbott_infinity_8").unwrap();
            let lead = place_lead(&model, Vec3::zeros(), Vec3::new(0.1, 0.2, 1.0), roll).unwrap();
            let cfg = FieldModelConfig { directional_gain_kappa: kappa, ..Default::default() };
            let t = build_transfer_matrix(&lead, &cfg, &[Vec3::new(px, py, pz)]).unwrap();
            prop_assert!(t.row(0).iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }
}
