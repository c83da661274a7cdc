//! `reservoir-sim`: run ensembles and calibrate the reservoir depletion model.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use reservoir_sim::harness::{self, ExperimentConfig};
use reservoir_sim::{SuccessDefinition, TransportFailure};

#[derive(Parser)]
#[command(version, about = "Reservoir-fed tweezer array loading simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an ensemble and write fig4.csv, events.csv and run_meta.toml.
    Simulate {
        /// TOML config file; defaults are used for anything it omits.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        replicas: Option<u64>,
        #[arg(long)]
        cycles: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        success_def: Option<SuccessArg>,
        #[arg(long, value_enum)]
        transport_failure: Option<FailureArg>,
        /// Skip the per-step event log (events.csv gets only its header).
        #[arg(long)]
        no_events: bool,
    },
    /// Find mean_ensemble_at_full that yields the target number of delivered atoms.
    Calibrate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        target_delivered: f64,
        #[arg(long, default_value_t = 0.5)]
        tolerance: f64,
        #[arg(long)]
        replicas: Option<u64>,
        #[arg(long)]
        cycles: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuccessArg {
    First,
    Maintained,
}

#[derive(Clone, Copy, ValueEnum)]
enum FailureArg {
    Lose,
    Stay,
}

fn load(path: Option<&PathBuf>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => Ok(ExperimentConfig::load(p)?),
        None => Ok(ExperimentConfig::default()),
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { config, replicas, cycles, seed, out, success_def, transport_failure, no_events } => {
            let mut cfg = load(config.as_ref())?;
            let e = &mut cfg.experiment;
            if let Some(n) = replicas {
                e.n_replicas = n;
            }
            if let Some(n) = cycles {
                e.n_cycles = n;
            }
            if let Some(s) = seed {
                e.master_seed = s;
            }
            if let Some(s) = success_def {
                e.success_definition = match s {
                    SuccessArg::First => SuccessDefinition::FirstAchievement,
                    SuccessArg::Maintained => SuccessDefinition::Maintained,
                };
            }
            if let Some(f) = transport_failure {
                e.transport_failure = match f {
                    FailureArg::Lose => TransportFailure::Lose,
                    FailureArg::Stay => TransportFailure::Stay,
                };
            }
            let resolved = cfg.resolve()?;
            let output = harness::run_experiment(&resolved, !no_events)?;
            harness::write_outputs(&out, &cfg, &output.stats, &output.events, resolved.sim.layout.metadata())
                .with_context(|| format!("writing results to {}", out.display()))?;

            let last = output.stats.cycles.last().expect("at least one cycle");
            println!(
                "{} replicas x {} cycles: success after cycle {} = {:.4} ± {:.4}, delivered atoms {:.2} ± {:.2}",
                resolved.n_replicas,
                resolved.n_cycles,
                last.cycle,
                last.success_rate,
                last.success_ci,
                output.stats.delivered_mean,
                output.stats.delivered_std
            );
            println!("wrote {}", out.display());
        }
        Command::Calibrate { config, target_delivered, tolerance, replicas, cycles, seed } => {
            let mut cfg = load(config.as_ref())?;
            if let Some(n) = replicas {
                cfg.experiment.n_replicas = n;
            }
            if let Some(n) = cycles {
                cfg.experiment.n_cycles = n;
            }
            if let Some(s) = seed {
                cfg.experiment.master_seed = s;
            }
            let resolved = cfg.resolve()?;
            let cal = harness::calibrate_depletion(&resolved, target_delivered, tolerance)?;
            println!("mean_ensemble_at_full = {:.6}", cal.mean_ensemble_at_full);
            println!("achieved_delivered = {:.4}", cal.achieved);
            println!("evaluations = {}", cal.evaluations);
            if !cal.converged {
                eprintln!("warning: bracket collapsed before reaching tolerance {tolerance}; best point reported");
            }
        }
    }
    Ok(())
}
