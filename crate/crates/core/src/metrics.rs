//! Overlap, inconsistency, cohort comparison, and the runtime benchmark.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::voxel_downsample;
use crate::field::build_transfer_matrix;
use crate::program::{optimize, Method, OptimizeOptions, ProblemParams, SolveStatus, StimulationProblem};
use crate::{ActivationMask, Error, FieldModelConfig, LabeledCloud, LeadInstance, Result};

/// Dice-Sorensen overlap `2|X ∩ Y| / (|X| + |Y|)`.
pub fn dice(x: &ActivationMask, y: &ActivationMask) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "mask lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let both = x.bits.iter().zip(&y.bits).filter(|(a, b)| **a && **b).count();
    let total = x.count() + y.count();
    if total == 0 {
        return Err(Error::InvalidArgument("dice is undefined for two empty masks".into()));
    }
    Ok(2.0 * both as f64 / total as f64)
}

/// Inconsistency `0.5 (missed / n_t + activated / n_c)`.
pub fn inconsistency(n_t_missed: usize, n_t: usize, n_c_activated: usize, n_c: usize) -> Result<f64> {
    if n_t == 0 || n_c == 0 {
        return Err(Error::InvalidArgument(
            "inconsistency needs target and constraint points".into(),
        ));
    }
    if n_t_missed > n_t || n_c_activated > n_c {
        return Err(Error::InvalidArgument(format!(
            "counts exceed totals: {n_t_missed}/{n_t} missed, {n_c_activated}/{n_c} activated"
        )));
    }
    Ok(0.5 * (n_t_missed as f64 / n_t as f64 + n_c_activated as f64 / n_c as f64))
}

/// Current proportions per contact (rows) and lead (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortMatrix {
    pub lead_ids: Vec<String>,
    /// `values[contact][lead]`.
    pub values: Vec<Vec<f64>>,
}

impl CohortMatrix {
    pub fn new(lead_ids: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        let m = Self { lead_ids, values };
        m.validate()?;
        Ok(m)
    }

    /// Normalize each lead's raw currents to proportions; zero columns stay zero.
    pub fn from_currents(lead_ids: Vec<String>, currents: &[Vec<f64>]) -> Result<Self> {
        if lead_ids.len() != currents.len() {
            return Err(Error::Dimension(format!(
                "{} lead ids for {} current vectors",
                lead_ids.len(),
                currents.len()
            )));
        }
        let contacts = currents.first().map_or(0, Vec::len);
        let mut values = vec![vec![0.0; lead_ids.len()]; contacts];
        for (l, u) in currents.iter().enumerate() {
            if u.len() != contacts {
                return Err(Error::Dimension(format!(
                    "lead {l} has {} contacts, expected {contacts}",
                    u.len()
                )));
            }
            if u.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "lead {l} has a negative or non-finite current"
                )));
            }
            let total: f64 = u.iter().sum();
            if total > 0.0 {
                for (p, v) in u.iter().enumerate() {
                    values[p][l] = v / total;
                }
            }
        }
        Self::new(lead_ids, values)
    }

    pub fn contact_count(&self) -> usize {
        self.values.len()
    }

    pub fn lead_count(&self) -> usize {
        self.lead_ids.len()
    }

    pub fn validate(&self) -> Result<()> {
        let leads = self.lead_ids.len();
        for (p, row) in self.values.iter().enumerate() {
            if row.len() != leads {
                return Err(Error::Dimension(format!(
                    "contact row {p} has {} entries for {leads} leads",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0 + 1e-9).contains(*v)) {
                return Err(Error::InvalidArgument(format!(
                    "proportion {v} outside [0, 1] in contact row {p}"
                )));
            }
        }
        for (l, id) in self.lead_ids.iter().enumerate() {
            let sum: f64 = self.values.iter().map(|row| row[l]).sum();
            if sum != 0.0 && (sum - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidArgument(format!(
                    "column '{id}' sums to {sum}, expected 0 or 1"
                )));
            }
        }
        Ok(())
    }
}

/// Frobenius norm of `a - b`.
pub fn frobenius_diff(a: &CohortMatrix, b: &CohortMatrix) -> Result<f64> {
    if a.lead_ids != b.lead_ids {
        return Err(Error::Dimension(format!(
            "lead ids differ: {:?} vs {:?}",
            a.lead_ids, b.lead_ids
        )));
    }
    if a.contact_count() != b.contact_count() {
        return Err(Error::Dimension(format!(
            "contact counts differ: {} vs {}",
            a.contact_count(),
            b.contact_count()
        )));
    }
    let sum: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y) * (x - y)))
        .sum();
    Ok(sum.sqrt())
}

/// Nine significant digits, the fixed precision of every CSV this crate writes.
pub fn format_sig9(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.8e}")
    } else {
        x.to_string()
    }
}

/// Cohort CSV: header `contact,<lead ids>`, one row per contact.
pub fn save_cohort_csv(matrix: &CohortMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec!["contact".to_string()];
    header.extend(matrix.lead_ids.iter().cloned());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (p, row) in matrix.values.iter().enumerate() {
        let mut rec = vec![p.to_string()];
        rec.extend(row.iter().map(|v| format_sig9(*v)));
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_cohort_csv(path: impl AsRef<Path>) -> Result<CohortMatrix> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.get(0) != Some("contact") || header.len() < 2 {
        return Err(Error::parse(path, 1, "expected header 'contact,<lead ids...>'"));
    }
    let lead_ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut values = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::parse(path, line, e.to_string()))?;
        let row = rec
            .iter()
            .skip(1)
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::parse(path, line, format!("'{s}': {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        values.push(row);
    }
    CohortMatrix::new(lead_ids, values).map_err(|e| Error::parse(path, 1, e.to_string()))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, 0, format!("{other:?}")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub voxel_mm: f64,
    pub n_t: usize,
    pub n_c: usize,
    pub method: Method,
    pub wall_time_s: f64,
    pub status: SolveStatus,
    pub beta: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub params: ProblemParams,
    pub solver: OptimizeOptions,
    /// Worker threads; 1 runs sweep points one after another.
    pub jobs: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            params: ProblemParams::default(),
            solver: OptimizeOptions::default(),
            jobs: 1,
        }
    }
}

/// Downsample, build, and solve at every voxel length with every method.
///
/// Records come back in sweep order (voxel-major) whatever `jobs` is.
pub fn run_benchmark(
    base_cloud: &LabeledCloud,
    lead: &LeadInstance,
    field: &FieldModelConfig,
    voxel_lengths: &[f64],
    methods: &[Method],
    options: &BenchOptions,
) -> Result<Vec<BenchRecord>> {
    if voxel_lengths.is_empty() || methods.is_empty() {
        return Err(Error::InvalidArgument(
            "benchmark needs voxel lengths and methods".into(),
        ));
    }
    let problems = voxel_lengths
        .iter()
        .map(|&v| {
            let cloud = voxel_downsample(base_cloud, v)?;
            let t = build_transfer_matrix(lead, field, &cloud.points)?;
            StimulationProblem::new(t, cloud, options.params)
        })
        .collect::<Result<Vec<_>>>()?;
    let tasks: Vec<(usize, Method)> = (0..problems.len())
        .flat_map(|k| methods.iter().map(move |&m| (k, m)))
        .collect();
    let run = |&(k, method): &(usize, Method)| -> Result<BenchRecord> {
        let problem = &problems[k];
        let report = optimize(problem, method, &options.solver)?;
        log::info!(
            "voxel {} mm, {} points, {method}: {:.3} s ({:?})",
            voxel_lengths[k],
            problem.cloud.len(),
            report.solver_stats.wall_time_s,
            report.solver_stats.status
        );
        Ok(BenchRecord {
            voxel_mm: voxel_lengths[k],
            n_t: problem.cloud.n_targets(),
            n_c: problem.cloud.n_constraints(),
            method,
            wall_time_s: report.solver_stats.wall_time_s,
            status: report.solver_stats.status,
            beta: report.beta,
            objective: report.objective,
        })
    };
    if options.jobs <= 1 {
        tasks.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start {} workers: {e}", options.jobs)))?;
        pool.install(|| tasks.par_iter().map(run).collect())
    }
}

pub const BENCH_HEADER: [&str; 8] = [
    "voxel_mm",
    "n_t",
    "n_c",
    "method",
    "wall_time_s",
    "status",
    "beta",
    "objective",
];

pub fn write_bench_csv<W: std::io::Write>(records: &[BenchRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Solver(format!("writing benchmark CSV: {e}"));
    w.write_record(BENCH_HEADER).map_err(io)?;
    for r in records {
        let status = serde_json::to_value(r.status)?;
        w.write_record([
            format_sig9(r.voxel_mm),
            r.n_t.to_string(),
            r.n_c.to_string(),
            r.method.to_string(),
            format_sig9(r.wall_time_s),
            status.as_str().unwrap_or_default().to_string(),
            format_sig9(r.beta),
            format_sig9(r.objective),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::Solver(format!("writing benchmark CSV: {e}")))
}
