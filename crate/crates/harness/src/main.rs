use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use membrane_harness::{run, ExperimentConfig, ExperimentKind, ExitStatus, HarnessError};

#[derive(Parser)]
#[command(name = "membrane-sim", version, about = "Simulate and verify diffusions with semipermeable membranes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its artifacts.
    Run {
        /// Experiment name; overrides the config.
        #[arg(value_name = "EXPERIMENT")]
        name: Option<ExperimentKind>,
        /// JSON config file; defaults apply when omitted.
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        #[arg(long, value_name = "NAME")]
        experiment: Option<ExperimentKind>,
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Run even if the scenario fails the assumption checks.
        #[arg(long)]
        force: bool,
    },
}

fn execute(cli: Cli) -> Result<ExitStatus, HarnessError> {
    let Command::Run { name, config, experiment, seed, out, force } = cli.command;
    let mut cfg = match &config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(kind) = experiment.or(name) {
        cfg.experiment = kind;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if out.is_some() {
        cfg.out = out;
    }
    cfg.check()?;
    let outcome = run(&cfg, force)?;
    print!("{}", outcome.report.summary());
    for path in &outcome.written {
        println!("wrote {}", path.display());
    }
    Ok(outcome.status)
}

fn main() -> ExitCode {
    let status = match execute(Cli::parse()) {
        Ok(status) => status,
        Err(e) => {
            let record = e.record();
            eprintln!("{}", serde_json::to_string(&record).expect("error record serializes"));
            record.status
        }
    };
    ExitCode::from(status.code() as u8)
}
