use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ssbo::acquisition::AcquisitionKind;
use ssbo::optimizer::Mode;
use ssbo_bench::bundle::ConditionSummary;
use ssbo_bench::{report, run_experiment, BenchError, ExperimentConfig, Overrides};

/// Bayesian optimization over sampling distributions: experiment runner.
#[derive(Parser)]
#[command(name = "ssbo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every condition and replicate of a config and write a bundle.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        replicates: Option<usize>,
        /// Base seed; replicate r uses seed + r.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        acquisition: Option<AcquisitionKind>,
        #[arg(long)]
        objective: Option<String>,
    },
    /// Recompute summary and bound files of an existing bundle.
    Report { bundle: PathBuf },
}

fn print_summaries(summaries: &[ConditionSummary]) {
    for s in summaries {
        let f = &s.final_simple_regret;
        println!("{}\tfinal simple regret {:.6} (se {:.6}, n = {})", s.condition, f.mean, f.std_error, f.values.len());
    }
}

fn main_inner() -> Result<(), BenchError> {
    match Cli::parse().command {
        Command::Run { config, replicates, seed, out, mode, batch_size, acquisition, objective } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.apply(&Overrides { replicates, seed, out, mode, batch_size, acquisition, objective });
            let (manifest, summaries) = run_experiment(&cfg)?;
            println!(
                "wrote {} ({} conditions x {} replicates)",
                cfg.output.display(),
                manifest.conditions.len(),
                manifest.replicates
            );
            print_summaries(&summaries);
        }
        Command::Report { bundle } => print_summaries(&report(&bundle)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
