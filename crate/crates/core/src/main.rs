use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use l1ilc::harness::{certify_experiment, replay, write_run, Experiment, ExperimentConfig, ScenarioResult};
use l1ilc::Result;

#[derive(Parser)]
#[command(name = "l1ilc", version, about = "L1 adaptive + iterative learning control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the stability certificates of a configuration as JSON.
    Certify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the configured scenario and write the run directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the configured scenario with a given number of sets.
    Batch {
        #[arg(long)]
        sets: usize,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run a stored run directory and compare every artifact.
    Replay {
        #[arg(long)]
        record: PathBuf,
    },
}

fn print_summary(result: &ScenarioResult) {
    println!("iteration  mean_error  std_error");
    let s = &result.summary;
    for k in 0..s.iteration.len() {
        println!("{:>9}  {:>10.6}  {:>9.6}", s.iteration[k], s.mean_error[k], s.std_error[k]);
    }
}

fn run(cfg: ExperimentConfig, out: Option<&Path>) -> Result<()> {
    let experiment = Experiment::new(cfg)?;
    let result = experiment.run_scenario()?;
    print_summary(&result);
    if let Some(dir) = out {
        write_run(dir, &experiment, &result)?;
        println!("wrote {} records to {}", result.record_count(), dir.display());
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Certify { config } => {
            let certs = certify_experiment(&ExperimentConfig::load(&config)?)?;
            println!("{}", serde_json::to_string_pretty(&certs)?);
            Ok(certs.iter().all(|c| c.is_satisfied()))
        }
        Command::Run { config, out } => {
            run(ExperimentConfig::load(&config)?, Some(&out))?;
            Ok(true)
        }
        Command::Batch { sets, config, out } => {
            let cfg = ExperimentConfig {
                sets,
                ..ExperimentConfig::load(&config)?
            };
            run(cfg, out.as_deref())?;
            Ok(true)
        }
        Command::Replay { record } => {
            let report = replay(&record)?;
            for name in &report.mismatched {
                println!("mismatch: {name}");
            }
            println!(
                "{} files compared, {}",
                report.files_compared,
                if report.identical() { "identical" } else { "DIFFERENT" }
            );
            Ok(report.identical())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
