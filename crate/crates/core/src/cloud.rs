//! Labelled target/constraint point clouds, voxel-grid downsampling and
//! synthetic STN-like scenarios.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Target,
    Constraint,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Target => "target",
            Label::Constraint => "constraint",
        })
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "target" => Ok(Label::Target),
            "constraint" => Ok(Label::Constraint),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledCloud {
    pub points: Vec<Vec3>,
    pub labels: Vec<Label>,
    pub region_names: Option<Vec<String>>,
}

impl LabeledCloud {
    pub fn new(points: Vec<Vec3>, labels: Vec<Label>) -> Result<Self> {
        let cloud = Self {
            points,
            labels,
            region_names: None,
        };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn indices_of(&self, label: Label) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.labels[k] == label).collect()
    }

    pub fn n_targets(&self) -> usize {
        self.labels.iter().filter(|&&l| l == Label::Target).count()
    }

    pub fn n_constraints(&self) -> usize {
        self.labels.iter().filter(|&&l| l == Label::Constraint).count()
    }

    /// Checks lengths, finiteness, and that no coordinate carries both labels.
    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.points.len() {
            return Err(Error::Dimension(format!(
                "{} points but {} labels",
                self.points.len(),
                self.labels.len()
            )));
        }
        if let Some(names) = &self.region_names {
            if names.len() != self.points.len() {
                return Err(Error::Dimension(format!(
                    "{} points but {} region names",
                    self.points.len(),
                    names.len()
                )));
            }
        }
        if let Some(k) = self.points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidArgument(format!("point {k} has a non-finite coordinate")));
        }
        let mut seen: BTreeMap<[u64; 3], Label> = BTreeMap::new();
        for (k, (p, &label)) in self.points.iter().zip(&self.labels).enumerate() {
            let key = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
            if let Some(&other) = seen.get(&key) {
                if other != label {
                    return Err(Error::InvalidArgument(format!(
                        "point {k} at ({}, {}, {}) is both target and constraint",
                        p.x, p.y, p.z
                    )));
                }
            } else {
                seen.insert(key, label);
            }
        }
        Ok(())
    }
}

/// Replace each occupied voxel by the centroid of its points, per label.
///
/// Voxels are anchored at the origin: a point falls into voxel
/// `floor(coord / voxel_length)` on every axis. Targets come first, then
/// constraints, each in lexicographic voxel order. A voxel's region name is
/// taken from the first input point that fell into it.
pub fn voxel_downsample(cloud: &LabeledCloud, voxel_length_mm: f64) -> Result<LabeledCloud> {
    if !(voxel_length_mm.is_finite() && voxel_length_mm > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "voxel length must be > 0, got {voxel_length_mm}"
        )));
    }
    cloud.validate()?;

    struct Bucket {
        sum: Vec3,
        count: usize,
        first: usize,
    }

    let mut out = LabeledCloud {
        region_names: cloud.region_names.as_ref().map(|_| Vec::new()),
        ..Default::default()
    };
    for label in [Label::Target, Label::Constraint] {
        let mut buckets: BTreeMap<[i64; 3], Bucket> = BTreeMap::new();
        for k in cloud.indices_of(label) {
            let p = cloud.points[k];
            let key = [
                (p.x / voxel_length_mm).floor() as i64,
                (p.y / voxel_length_mm).floor() as i64,
                (p.z / voxel_length_mm).floor() as i64,
            ];
            let bucket = buckets.entry(key).or_insert(Bucket {
                sum: Vec3::zeros(),
                count: 0,
                first: k,
            });
            bucket.sum += p;
            bucket.count += 1;
        }
        for bucket in buckets.values() {
            out.points.push(bucket.sum / bucket.count as f64);
            out.labels.push(label);
            if let (Some(dst), Some(src)) = (out.region_names.as_mut(), cloud.region_names.as_ref()) {
                dst.push(src[bucket.first].clone());
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub name: String,
    pub center: [f64; 3],
    pub semi_axes: [f64; 3],
    pub count: usize,
    /// Defaults to target for a region named "motor", constraint otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<Label>,
}

impl RegionSpec {
    pub fn label(&self) -> Label {
        self.role.unwrap_or(if self.name.eq_ignore_ascii_case("motor") {
            Label::Target
        } else {
            Label::Constraint
        })
    }

    /// `sum(((x - c) / a)^2) <= 1`
    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3)
            .map(|i| ((p[i] - self.center[i]) / self.semi_axes[i]).powi(2))
            .sum::<f64>()
            <= 1.0
    }
}

/// Ellipsoidal stand-ins for the motor, associative and limbic STN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub regions: Vec<RegionSpec>,
}

impl SyntheticSpec {
    /// A lead along +z from the origin passes through the motor region; the
    /// constraint regions sit medially and ventrally.
    pub fn stn_default() -> Self {
        Self::stn_scaled(1.0, [300, 200, 200])
    }

    /// Default layout with every semi-axis and offset multiplied by `scale`.
    pub fn stn_scaled(scale: f64, counts: [usize; 3]) -> Self {
        let region = |name: &str, center: [f64; 3], semi: [f64; 3], count| RegionSpec {
            name: name.to_string(),
            center: center.map(|c| c * scale),
            semi_axes: semi.map(|a| a * scale),
            count,
            role: None,
        };
        Self {
            regions: vec![
                region("motor", [1.6, 0.4, 5.0], [2.4, 1.8, 2.2], counts[0]),
                region("associative", [-2.6, 1.8, 4.2], [1.8, 1.6, 1.8], counts[1]),
                region("limbic", [-1.6, -2.6, 2.0], [1.6, 1.4, 1.6], counts[2]),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let targets = self.regions.iter().filter(|r| r.label() == Label::Target).count();
        if targets != 1 {
            return Err(Error::InvalidArgument(format!(
                "synthetic spec needs exactly one target region, found {targets}"
            )));
        }
        if self.regions.len() < 2 {
            return Err(Error::InvalidArgument(
                "synthetic spec needs at least one constraint region".into(),
            ));
        }
        for r in &self.regions {
            if r.semi_axes.iter().any(|&a| !(a.is_finite() && a > 0.0)) {
                return Err(Error::InvalidArgument(format!(
                    "region `{}` has non-positive semi-axes",
                    r.name
                )));
            }
            if r.center.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "region `{}` has a non-finite center",
                    r.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCloud {
    pub cloud: LabeledCloud,
    /// Points that fell into both a target and a constraint ellipsoid. They
    /// are labelled target.
    pub overlap_count: usize,
}

/// Uniformly sample each region's ellipsoid (rejection sampling in the
/// bounding box) with a ChaCha8 stream seeded from `seed`.
pub fn generate_synthetic_stn(seed: u64, spec: &SyntheticSpec) -> Result<SyntheticCloud> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target_regions: Vec<&RegionSpec> = spec.regions.iter().filter(|r| r.label() == Label::Target).collect();
    let constraint_regions: Vec<&RegionSpec> = spec.regions.iter().filter(|r| r.label() == Label::Constraint).collect();

    let total: usize = spec.regions.iter().map(|r| r.count).sum();
    let mut cloud = LabeledCloud {
        points: Vec::with_capacity(total),
        labels: Vec::with_capacity(total),
        region_names: Some(Vec::with_capacity(total)),
    };
    let mut overlap_count = 0;
    for region in &spec.regions {
        for _ in 0..region.count {
            let unit = loop {
                let v = Vec3::new(
                    rng.gen_range(-1.0..=1.0),
                    rng.gen_range(-1.0..=1.0),
                    rng.gen_range(-1.0..=1.0),
                );
                if v.norm_squared() <= 1.0 {
                    break v;
                }
            };
            let p = Vec3::new(
                region.center[0] + region.semi_axes[0] * unit.x,
                region.center[1] + region.semi_axes[1] * unit.y,
                region.center[2] + region.semi_axes[2] * unit.z,
            );
            let in_target = target_regions.iter().any(|r| r.contains(&p));
            let in_constraint = constraint_regions.iter().any(|r| r.contains(&p));
            let label = if in_target { Label::Target } else { region.label() };
            if in_target && in_constraint {
                overlap_count += 1;
            }
            cloud.points.push(p);
            cloud.labels.push(label);
            if let Some(names) = cloud.region_names.as_mut() {
                names.push(region.name.clone());
            }
        }
    }
    if overlap_count > 0 {
        log::warn!("{overlap_count} synthetic points fell into both a target and a constraint region");
    }
    Ok(SyntheticCloud { cloud, overlap_count })
}

/// Read a cloud CSV with header `x,y,z,label[,region]`.
pub fn load_cloud(path: impl AsRef<Path>) -> Result<LabeledCloud> {
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
    let cols: Vec<&str> = header.iter().collect();
    let has_region = match cols.as_slice() {
        ["x", "y", "z", "label"] => false,
        ["x", "y", "z", "label", "region"] => true,
        _ => return Err(Error::parse(path, 1, "expected header `x,y,z,label[,region]`")),
    };
    let width = cols.len();

    let mut cloud = LabeledCloud {
        region_names: has_region.then(Vec::new),
        ..Default::default()
    };
    for (k, rec) in records.enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::parse(path, line, e.to_string()))?;
        if rec.len() != width {
            return Err(Error::parse(
                path,
                line,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        let mut xyz = [0.0; 3];
        for (i, c) in xyz.iter_mut().enumerate() {
            *c = rec[i]
                .parse()
                .map_err(|_| Error::parse(path, line, format!("bad coordinate `{}`", &rec[i])))?;
        }
        let label: Label = rec[3].parse().map_err(|e: String| Error::parse(path, line, e))?;
        cloud.points.push(Vec3::from(xyz));
        cloud.labels.push(label);
        if let Some(names) = cloud.region_names.as_mut() {
            names.push(rec[4].to_string());
        }
    }
    cloud.validate()?;
    Ok(cloud)
}

/// Write a cloud CSV. Coordinates carry 12 decimals.
pub fn save_cloud(cloud: &LabeledCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str(if cloud.region_names.is_some() {
        "x,y,z,label,region\n"
    } else {
        "x,y,z,label\n"
    });
    for (k, p) in cloud.points.iter().enumerate() {
        out.push_str(&format!("{:.12},{:.12},{:.12},{}", p.x, p.y, p.z, cloud.labels[k]));
        if let Some(names) = &cloud.region_names {
            out.push(',');
            out.push_str(&names[k]);
        }
        out.push('\n');
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
