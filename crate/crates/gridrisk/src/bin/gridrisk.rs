//! Thin command-line front end; all functionality lives in the library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gridrisk::pipeline::{cmd_assess, cmd_generate_scenarios, cmd_mitigate, cmd_report, RunConfig};

#[derive(Parser)]
#[command(
    name = "gridrisk",
    version,
    about = "Long-horizon renewable power system tail-risk assessment and mitigation"
)]
struct Cli {
    /// Run configuration file (JSON).
    #[arg(long, global = true, default_value = "gridrisk.json")]
    config: PathBuf,
    /// Override the config's RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the config's worker-thread count.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Override the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate representative scenarios from historical records.
    GenerateScenarios,
    /// Build the storage reference, evolve all scenarios, assess tail risk.
    Assess,
    /// Iteratively refine the storage reference until flags clear.
    Mitigate,
    /// Summarize prior outputs into a report and plot-ready tables.
    Report,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut config = match RunConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        config.jobs = jobs;
    }
    if let Some(out) = cli.out {
        config.out_dir = out;
    }

    let result = match cli.command {
        Command::GenerateScenarios => cmd_generate_scenarios(&config),
        Command::Assess => cmd_assess(&config),
        Command::Mitigate => cmd_mitigate(&config),
        Command::Report => cmd_report(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
