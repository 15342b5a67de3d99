use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use entsched_cli::commands::{cmd_all, cmd_dataset, cmd_report, cmd_simulate, cmd_topology, cmd_train};
use entsched_cli::report::ReportOptions;
use entsched_cli::{CliResult, ExperimentConfig};

/// Entanglement request scheduling experiments on a simulated repeater network.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// TOML experiment config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's seed for topology, dataset and training.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the network and write its edge list.
    Topology,
    /// Sample the classifier training set.
    Dataset,
    /// Train the round classifier and write the model and per-epoch report.
    Train,
    /// Run every configured (policy, lambda, seed) simulation.
    Simulate,
    /// Build CDFs, gain and utilization tables from simulation output.
    Report {
        /// Also render CDF charts as SVG.
        #[arg(long)]
        svg: bool,
    },
    /// Run all of the above in order.
    All {
        #[arg(long)]
        svg: bool,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    match cli.command {
        Command::Topology => {
            let path = cmd_topology(&cfg)?;
            println!("wrote {}", path.display());
        }
        Command::Dataset => {
            let path = cmd_dataset(&cfg)?;
            println!("wrote {}", path.display());
        }
        Command::Train => {
            let report = cmd_train(&cfg)?;
            println!(
                "validation accuracy {:.4}; wrote {} and {}",
                report.final_accuracy().unwrap_or(0.0),
                cfg.model_path().display(),
                cfg.training_report_path().display()
            );
        }
        Command::Simulate => {
            let files = cmd_simulate(&cfg)?;
            println!("wrote {} files under {}", files.len(), cfg.runs_dir().display());
        }
        Command::Report { svg } => {
            let files = cmd_report(&cfg, &ReportOptions { svg })?;
            println!("wrote {} files under {}", files.len(), cfg.report_dir().display());
        }
        Command::All { svg } => {
            cmd_all(&cfg, &ReportOptions { svg })?;
            println!("wrote results under {}", cfg.output_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
