use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dbs_steer::cli::{self, CommandOutcome, Overrides, RunConfig};
use dbs_steer::{Method, Result};

#[derive(Parser)]
#[command(name = "dbs-steer", version, about = "Current steering for directional DBS leads")]
struct Args {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Scenario seed, overriding `solver.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic point cloud and its provenance sidecar.
    Generate,
    /// Voxel-filter the scenario cloud at each length.
    Downsample {
        #[arg(long, value_delimiter = ',', required = true)]
        voxel: Vec<f64>,
    },
    /// Solve the configured problem and write reports.
    Optimize {
        #[arg(long, default_value = "lp")]
        method: Method,
        /// Constraint fractions for the LP, e.g. 0,0.2,0.4.
        #[arg(long, value_delimiter = ',')]
        theta: Option<Vec<f64>>,
    },
    /// Pairwise Frobenius differences between reports or cohort CSVs.
    Compare {
        #[arg(required = true, num_args = 2..)]
        inputs: Vec<PathBuf>,
    },
    /// Runtime sweep over voxel lengths.
    Bench {
        #[arg(long, value_delimiter = ',')]
        voxel: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        method: Option<Vec<Method>>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn load_config(args: &Args, overrides: Overrides) -> Result<RunConfig> {
    let path = args
        .config
        .as_ref()
        .ok_or_else(|| dbs_steer::Error::Config("--config is required for this command".into()))?;
    let mut config = RunConfig::load(path)?;
    config.apply(&overrides)?;
    Ok(config)
}

fn run(args: Args) -> Result<CommandOutcome> {
    let base = Overrides {
        out: args.out.clone(),
        seed: args.seed,
        ..Default::default()
    };
    match &args.command {
        Command::Generate => cli::cmd_generate(&load_config(&args, base)?),
        Command::Downsample { voxel } => cli::cmd_downsample(&load_config(&args, base)?, voxel),
        Command::Optimize { method, theta } => {
            let config = load_config(
                &args,
                Overrides {
                    thetas: theta.clone(),
                    ..base
                },
            )?;
            let (outcome, reports) = cli::cmd_optimize(&config, *method)?;
            for r in &reports {
                let s = &r.report.solver_stats;
                let theta = r.report.theta.map_or(String::new(), |t| format!(" theta={t}"));
                println!(
                    "{}{theta}: beta={:.4} total={:.4} mA status={:?} time={:.3}s",
                    r.report.method,
                    r.report.beta,
                    r.report.distribution.total_ma(),
                    s.status,
                    s.wall_time_s
                );
            }
            Ok(outcome)
        }
        Command::Compare { inputs } => {
            let out = args.out.clone().unwrap_or_else(|| PathBuf::from("."));
            let (outcome, pairs) = cli::cmd_compare(inputs, &out)?;
            for p in &pairs {
                println!("{} vs {}: {:.6}", p.a, p.b, p.frobenius);
            }
            Ok(outcome)
        }
        Command::Bench { voxel, method, jobs } => {
            let mut config = load_config(
                &args,
                Overrides {
                    voxels: voxel.clone(),
                    ..base
                },
            )?;
            if let Some(m) = method {
                config.bench.methods = m.clone();
            }
            cli::cmd_bench(&config, *jobs)
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code_for(&e) as u8)
        }
    }
}
