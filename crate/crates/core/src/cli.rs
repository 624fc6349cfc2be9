//! Run configuration and the commands behind the `dbs-steer` binary.
//!
//! Every command reads a [`RunConfig`], writes its outputs below
//! `output_dir`, and returns a [`CommandOutcome`] whose exit code the binary
//! passes to the shell.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cloud::{generate_synthetic_stn, load_cloud, save_cloud, voxel_downsample, SyntheticSpec};
use crate::field::{build_transfer_matrix, load_transfer_matrix};
use crate::lead::{builtin_model, place_lead};
use crate::metrics::{
    format_sig9, frobenius_diff, load_cohort_csv, run_benchmark, write_bench_csv, BenchOptions, CohortMatrix,
};
use crate::milp::MilpOptions;
use crate::program::{optimize, Method, OptimizeOptions, ProblemParams, SolveStatus, StimulationProblem};
use crate::{Error, FieldModelConfig, LabeledCloud, LeadInstance, OptimizationReport, Result, TransferMatrix, Vec3};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_TIMEOUT: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

/// Exit code for an error that aborted a command.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::InvalidArgument(_)
        | Error::UnknownLeadModel(_)
        | Error::InvalidPlacement(_)
        | Error::Json(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeadBlock {
    pub model_id: String,
    pub tip: [f64; 3],
    pub axis: [f64; 3],
    #[serde(default)]
    pub roll_degrees: f64,
}

impl Default for LeadBlock {
    fn default() -> Self {
        Self {
            model_id: "boston_cartesia_8".into(),
            tip: [0.0; 3],
            axis: [0.0, 0.0, 1.0],
            roll_degrees: 0.0,
        }
    }
}

impl LeadBlock {
    pub fn place(&self) -> Result<LeadInstance> {
        let model = builtin_model(&self.model_id)?;
        place_lead(
            &model,
            Vec3::from(self.tip),
            Vec3::from(self.axis),
            self.roll_degrees.to_radians(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticScenario {
    /// Defaults to the three-region nucleus.
    #[serde(default = "SyntheticSpec::stn_default")]
    pub spec: SyntheticSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalScenario {
    pub transfer_matrix: PathBuf,
    /// Labels for the matrix rows, in row order.
    pub cloud: PathBuf,
}

/// Exactly one source must be set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticScenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cloud: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external: Option<ExternalScenario>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemBlock {
    pub e_th_t: f64,
    pub e_th_c: f64,
    pub i_max_contact_ma: f64,
    pub i_max_total_ma: f64,
    pub thetas: Vec<f64>,
    /// Downsample the scenario cloud before optimizing.
    pub voxel_mm: Option<f64>,
}

impl Default for ProblemBlock {
    fn default() -> Self {
        let p = ProblemParams::default();
        Self {
            e_th_t: p.e_th_t,
            e_th_c: p.e_th_c,
            i_max_contact_ma: p.i_max_contact_ma,
            i_max_total_ma: p.i_max_total_ma,
            thetas: vec![1.0],
            voxel_mm: None,
        }
    }
}

impl ProblemBlock {
    pub fn params(&self, theta: f64) -> ProblemParams {
        ProblemParams {
            e_th_t: self.e_th_t,
            e_th_c: self.e_th_c,
            i_max_contact_ma: self.i_max_contact_ma,
            i_max_total_ma: self.i_max_total_ma,
            theta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverBlock {
    pub time_limit_s: f64,
    pub gap_tol: f64,
    /// Seed for synthetic scenario generation.
    pub seed: u64,
}

impl Default for SolverBlock {
    fn default() -> Self {
        Self {
            time_limit_s: 1500.0,
            gap_tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchBlock {
    pub voxel_lengths: Vec<f64>,
    pub methods: Vec<Method>,
    /// Constraint fraction used for the LP runs.
    pub theta: f64,
}

impl Default for BenchBlock {
    fn default() -> Self {
        Self {
            voxel_lengths: vec![1.4, 1.2, 1.0, 0.95, 0.9, 0.85, 0.8],
            methods: vec![Method::Lp, Method::Milp],
            theta: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub lead: LeadBlock,
    /// Column label for this lead in cohort outputs.
    #[serde(default = "default_lead_id")]
    pub lead_id: String,
    #[serde(default)]
    pub field: FieldModelConfig,
    pub scenario: ScenarioBlock,
    #[serde(default)]
    pub problem: ProblemBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub bench: BenchBlock,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_lead_id() -> String {
    "lead".into()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub thetas: Option<Vec<f64>>,
    pub voxels: Option<Vec<f64>>,
}

impl RunConfig {
    /// Read and validate a config file. Relative scenario paths resolve
    /// against the config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            config.resolve_paths(dir);
        }
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        if let Some(c) = &mut self.scenario.cloud {
            fix(c);
        }
        if let Some(ext) = &mut self.scenario.external {
            fix(&mut ext.transfer_matrix);
            fix(&mut ext.cloud);
        }
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(out) = &o.out {
            self.output_dir = out.clone();
        }
        if let Some(seed) = o.seed {
            self.solver.seed = seed;
        }
        if let Some(t) = &o.thetas {
            self.problem.thetas = t.clone();
        }
        if let Some(v) = &o.voxels {
            self.bench.voxel_lengths = v.clone();
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        let sources = s.synthetic.is_some() as usize + s.cloud.is_some() as usize + s.external.is_some() as usize;
        if sources != 1 {
            return Err(Error::Config(format!(
                "scenario needs exactly one of synthetic, cloud, external (found {sources})"
            )));
        }
        if let Some(syn) = &s.synthetic {
            syn.spec.validate().map_err(config_error)?;
        }
        if s.external.is_some() && self.problem.voxel_mm.is_some() {
            return Err(Error::Config(
                "voxel_mm cannot be combined with an external transfer matrix".into(),
            ));
        }
        if self.problem.thetas.is_empty() {
            return Err(Error::Config("problem.thetas is empty".into()));
        }
        for &theta in &self.problem.thetas {
            self.problem.params(theta).validate().map_err(config_error)?;
        }
        self.bench_params().validate().map_err(config_error)?;
        if let Some(v) = self.problem.voxel_mm {
            check_voxel(v)?;
        }
        for &v in &self.bench.voxel_lengths {
            check_voxel(v)?;
        }
        if self.bench.voxel_lengths.is_empty() || self.bench.methods.is_empty() {
            return Err(Error::Config("bench needs voxel lengths and methods".into()));
        }
        let (t, g) = (self.solver.time_limit_s, self.solver.gap_tol);
        if t.is_nan() || t < 0.0 || g.is_nan() || g < 0.0 {
            return Err(Error::Config("solver time limit and gap must be non-negative".into()));
        }
        self.field.validate().map_err(config_error)?;
        builtin_model(&self.lead.model_id)?;
        Ok(())
    }

    fn bench_params(&self) -> ProblemParams {
        self.problem.params(self.bench.theta)
    }

    pub fn optimize_options(&self) -> OptimizeOptions {
        OptimizeOptions {
            milp: MilpOptions {
                time_limit_s: self.solver.time_limit_s,
                gap_tol: self.solver.gap_tol,
                ..Default::default()
            },
            ..Default::default()
        }
    }
}

fn check_voxel(v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("voxel length {v} must be positive")))
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

/// What a command produced and how the process should exit.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutcome {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
}

/// Scenario inputs: the cloud, an optional precomputed matrix, and a digest
/// covering the config and every input file.
struct Scenario {
    cloud: LabeledCloud,
    transfer: Option<TransferMatrix>,
    digest: String,
}

fn load_scenario(config: &RunConfig) -> Result<Scenario> {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(config)?);
    let mut read = |path: &Path| -> Result<()> {
        hasher.update(fs::read(path).map_err(|e| Error::io(path, e))?);
        Ok(())
    };
    let (cloud, transfer) = match (
        &config.scenario.synthetic,
        &config.scenario.cloud,
        &config.scenario.external,
    ) {
        (Some(syn), None, None) => (generate_synthetic_stn(config.solver.seed, &syn.spec)?.cloud, None),
        (None, Some(path), None) => {
            read(path)?;
            (load_cloud(path)?, None)
        }
        (None, None, Some(ext)) => {
            read(&ext.transfer_matrix)?;
            read(&ext.cloud)?;
            (
                load_cloud(&ext.cloud)?,
                Some(load_transfer_matrix(&ext.transfer_matrix)?),
            )
        }
        _ => return Err(Error::Config("scenario needs exactly one source".into())),
    };
    Ok(Scenario {
        cloud,
        transfer,
        digest: hex::encode(hasher.finalize()),
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize)]
struct Provenance<'a> {
    seed: u64,
    spec: &'a SyntheticSpec,
    point_count: usize,
    n_targets: usize,
    n_constraints: usize,
    overlap_count: usize,
    cloud_sha256: String,
}

/// Write the synthetic cloud as `cloud.csv` with a `cloud.json` sidecar.
pub fn cmd_generate(config: &RunConfig) -> Result<CommandOutcome> {
    let syn = config
        .scenario
        .synthetic
        .as_ref()
        .ok_or_else(|| Error::Config("generate needs a synthetic scenario".into()))?;
    let generated = generate_synthetic_stn(config.solver.seed, &syn.spec)?;
    ensure_dir(&config.output_dir)?;
    let cloud_path = config.output_dir.join("cloud.csv");
    save_cloud(&generated.cloud, &cloud_path)?;
    let bytes = fs::read(&cloud_path).map_err(|e| Error::io(&cloud_path, e))?;
    let sidecar = config.output_dir.join("cloud.json");
    write_json(
        &Provenance {
            seed: config.solver.seed,
            spec: &syn.spec,
            point_count: generated.cloud.len(),
            n_targets: generated.cloud.n_targets(),
            n_constraints: generated.cloud.n_constraints(),
            overlap_count: generated.overlap_count,
            cloud_sha256: hex::encode(Sha256::digest(&bytes)),
        },
        &sidecar,
    )?;
    Ok(CommandOutcome {
        exit_code: EXIT_OK,
        files: vec![cloud_path, sidecar],
    })
}

#[derive(Debug, Serialize)]
struct DownsampleRow {
    voxel_mm: f64,
    path: PathBuf,
    n_targets: usize,
    n_constraints: usize,
}

/// Write `cloud_voxel_<v>.csv` for each voxel length plus `downsample.json`.
pub fn cmd_downsample(config: &RunConfig, voxels: &[f64]) -> Result<CommandOutcome> {
    if config.scenario.external.is_some() {
        return Err(Error::Config(
            "an external transfer matrix cannot be downsampled".into(),
        ));
    }
    if voxels.is_empty() {
        return Err(Error::Config("downsample needs at least one voxel length".into()));
    }
    for &v in voxels {
        check_voxel(v)?;
    }
    let scenario = load_scenario(config)?;
    ensure_dir(&config.output_dir)?;
    let mut files = Vec::new();
    let mut rows = Vec::new();
    for &v in voxels {
        let reduced = voxel_downsample(&scenario.cloud, v)?;
        let path = config.output_dir.join(format!("cloud_voxel_{v}.csv"));
        save_cloud(&reduced, &path)?;
        rows.push(DownsampleRow {
            voxel_mm: v,
            path: path.clone(),
            n_targets: reduced.n_targets(),
            n_constraints: reduced.n_constraints(),
        });
        files.push(path);
    }
    let summary = config.output_dir.join("downsample.json");
    write_json(&rows, &summary)?;
    files.push(summary);
    Ok(CommandOutcome {
        exit_code: EXIT_OK,
        files,
    })
}

/// Persisted optimization report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub lead_id: String,
    pub input_digest: String,
    pub point_count: usize,
    pub contact_labels: Vec<String>,
    #[serde(flatten)]
    pub report: OptimizationReport,
}

impl RunReport {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }
}

/// Build the stimulation problem a config describes.
pub fn build_problem(config: &RunConfig, theta: f64) -> Result<(StimulationProblem, String)> {
    let scenario = load_scenario(config)?;
    let problem = problem_from_scenario(config, scenario.cloud, scenario.transfer, theta)?;
    Ok((problem, scenario.digest))
}

fn problem_from_scenario(
    config: &RunConfig,
    cloud: LabeledCloud,
    transfer: Option<TransferMatrix>,
    theta: f64,
) -> Result<StimulationProblem> {
    let params = config.problem.params(theta);
    match transfer {
        Some(t) => StimulationProblem::new(t, cloud, params),
        None => {
            let cloud = match config.problem.voxel_mm {
                Some(v) => voxel_downsample(&cloud, v)?,
                None => cloud,
            };
            let lead = config.lead.place()?;
            let t = build_transfer_matrix(&lead, &config.field, &cloud.points)?;
            StimulationProblem::new(t, cloud, params)
        }
    }
}

fn contact_labels(config: &RunConfig, contacts: usize) -> Vec<String> {
    match builtin_model(&config.lead.model_id) {
        Ok(m) if m.segment_labels.len() == contacts => m.segment_labels,
        _ => (0..contacts).map(|p| p.to_string()).collect(),
    }
}

fn write_distribution_csv(report: &RunReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Solver(format!("{}: {e}", path.display())))?;
    let d = &report.report.distribution;
    let mut rows = vec![vec![
        "contact".to_string(),
        "label".into(),
        "u_ma".into(),
        "proportion".into(),
    ]];
    for (p, label) in report.contact_labels.iter().enumerate() {
        rows.push(vec![
            p.to_string(),
            label.clone(),
            format_sig9(d.u_ma[p]),
            format_sig9(d.normalized[p]),
        ]);
    }
    for row in rows {
        w.write_record(&row)
            .map_err(|e| Error::Solver(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn status_exit_code(status: SolveStatus) -> i32 {
    match status {
        SolveStatus::Optimal => EXIT_OK,
        SolveStatus::Infeasible => EXIT_INFEASIBLE,
        SolveStatus::TimeLimit => EXIT_TIMEOUT,
    }
}

/// Solve with `method`: one report per configured theta for the LP, a single
/// report for the MILP. Writes `report_<tag>.json` and `distribution_<tag>.csv`.
pub fn cmd_optimize(config: &RunConfig, method: Method) -> Result<(CommandOutcome, Vec<RunReport>)> {
    let scenario = load_scenario(config)?;
    let base = problem_from_scenario(config, scenario.cloud, scenario.transfer, 1.0)?;
    let options = config.optimize_options();
    let labels = contact_labels(config, base.contact_count());
    let runs: Vec<(String, StimulationProblem)> = match method {
        Method::Lp => config
            .problem
            .thetas
            .iter()
            .map(|&t| (format!("lp_theta{t}"), base.with_theta(t)))
            .collect(),
        Method::Milp => vec![("milp".to_string(), base)],
    };
    let reports = runs
        .par_iter()
        .map(|(_, problem)| optimize(problem, method, &options))
        .collect::<Result<Vec<_>>>()?;
    ensure_dir(&config.output_dir)?;
    let mut files = Vec::new();
    let mut exit_code = EXIT_OK;
    let mut out = Vec::new();
    for ((tag, problem), report) in runs.iter().zip(reports) {
        exit_code = exit_code.max(status_exit_code(report.solver_stats.status));
        let run = RunReport {
            lead_id: config.lead_id.clone(),
            input_digest: scenario.digest.clone(),
            point_count: problem.cloud.len(),
            contact_labels: labels.clone(),
            report,
        };
        let json = config.output_dir.join(format!("report_{tag}.json"));
        let csv_path = config.output_dir.join(format!("distribution_{tag}.csv"));
        write_json(&run, &json)?;
        write_distribution_csv(&run, &csv_path)?;
        files.extend([json, csv_path]);
        out.push(run);
    }
    Ok((CommandOutcome { exit_code, files }, out))
}

/// One named cohort matrix: a cohort CSV, or a single-lead report.
pub fn load_comparable(path: &Path) -> Result<(String, CohortMatrix)> {
    let name = path
        .file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let matrix = if is_json {
        let run = RunReport::load(path)?;
        CohortMatrix::new(
            vec![run.lead_id],
            run.report.distribution.normalized.iter().map(|v| vec![*v]).collect(),
        )?
    } else {
        load_cohort_csv(path)?
    };
    Ok((name, matrix))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub a: String,
    pub b: String,
    pub frobenius: f64,
}

/// Pairwise Frobenius differences between every pair of inputs, written to
/// `comparison.csv` and `comparison.json` in `out_dir`.
pub fn cmd_compare(inputs: &[PathBuf], out_dir: &Path) -> Result<(CommandOutcome, Vec<PairwiseComparison>)> {
    if inputs.len() < 2 {
        return Err(Error::InvalidArgument("compare needs at least two inputs".into()));
    }
    let named = inputs.iter().map(|p| load_comparable(p)).collect::<Result<Vec<_>>>()?;
    let mut pairs = Vec::new();
    for i in 0..named.len() {
        for j in i + 1..named.len() {
            pairs.push(PairwiseComparison {
                a: named[i].0.clone(),
                b: named[j].0.clone(),
                frobenius: frobenius_diff(&named[i].1, &named[j].1)?,
            });
        }
    }
    ensure_dir(out_dir)?;
    let csv_path = out_dir.join("comparison.csv");
    let mut text = String::from("a,b,frobenius\n");
    for p in &pairs {
        text.push_str(&format!("{},{},{}\n", p.a, p.b, format_sig9(p.frobenius)));
    }
    fs::write(&csv_path, text).map_err(|e| Error::io(&csv_path, e))?;
    let json = out_dir.join("comparison.json");
    write_json(&pairs, &json)?;
    Ok((
        CommandOutcome {
            exit_code: EXIT_OK,
            files: vec![csv_path, json],
        },
        pairs,
    ))
}

/// Run the runtime sweep from the config's bench block into `bench.csv`.
pub fn cmd_bench(config: &RunConfig, jobs: usize) -> Result<CommandOutcome> {
    if config.scenario.external.is_some() {
        return Err(Error::Config("bench needs a point cloud scenario to downsample".into()));
    }
    let scenario = load_scenario(config)?;
    let lead = config.lead.place()?;
    let options = BenchOptions {
        params: config.bench_params(),
        solver: config.optimize_options(),
        jobs,
    };
    let records = run_benchmark(
        &scenario.cloud,
        &lead,
        &config.field,
        &config.bench.voxel_lengths,
        &config.bench.methods,
        &options,
    )?;
    ensure_dir(&config.output_dir)?;
    let path = config.output_dir.join("bench.csv");
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_bench_csv(&records, file)?;
    Ok(CommandOutcome {
        exit_code: EXIT_OK,
        files: vec![path],
    })
}
