use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use calib_core::experiments::{run_experiment, Arm, ExperimentConfig, RunRecord};

#[derive(Parser)]
#[command(name = "calib-lab", version, about = "Calibration experiments on synthetic overlapping classes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Output directory (overrides `out_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base seed (overrides `seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated arms, e.g. `erm+ts,mixup`.
        #[arg(long, value_delimiter = ',')]
        arms: Option<Vec<Arm>>,
        #[arg(long)]
        replicates: Option<usize>,
        /// Also exit nonzero when a directional check fails.
        #[arg(long)]
        strict: bool,
    },
    /// Print the config with every default filled in.
    Resolve { config: PathBuf },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Resolve { config } => {
            let cfg = load(&config)?;
            print!("{}", cfg.to_toml());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            config,
            out,
            seed,
            arms,
            replicates,
            strict,
        } => {
            let mut cfg = load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if arms.is_some() {
                cfg.arms = arms;
            }
            if replicates.is_some() {
                cfg.replicates = replicates;
            }
            cfg.validate()?;
            let out = out.or_else(|| cfg.out_dir.clone());
            let Some(out) = out else {
                bail!("no output directory: pass --out or set out_dir in the config");
            };
            let run = run_experiment(&cfg, Some(&out))
                .with_context(|| format!("running {}", config.display()))?;
            report(&run);
            println!("wrote {}", out.display());
            let checks_ok = run.checks.iter().all(|c| c.passed);
            Ok(if run.succeeded() && (checks_ok || !strict) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}

fn load(path: &PathBuf) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()))
}

fn report(run: &RunRecord) {
    println!("sweep_value,arm,metric,mean,std");
    for s in run.summary() {
        println!("{},{},{},{:.6},{:.6}", s.sweep_value, s.arm, s.metric, s.mean, s.std);
    }
    for c in &run.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for f in &run.failures {
        println!("FAILURE {f}");
    }
    println!("{:.1}s", run.wall_clock_seconds);
}
