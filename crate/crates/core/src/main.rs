use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hydro_mfc::cli::{cmd_calibrate, cmd_run, cmd_sweep, Overrides, PlantKind};

/// Model-free level control of a hydroelectric reach.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop scenario and write traces, metrics and charts.
    Run(Common),
    /// Calibrate the near-actuator level table on the Saint-Venant plant.
    Calibrate(Common),
    /// Run a scenario at several sampling periods and compare excursions.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Sampling periods in seconds, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        periods: Vec<f64>,
    },
}

#[derive(Args)]
struct Common {
    /// Configuration file; the shipped defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed of the lock-flush schedule.
    #[arg(long)]
    seed: Option<u64>,
    /// Plant model: pde or surrogate.
    #[arg(long)]
    plant: Option<PlantKind>,
    /// Scenario number (1, 2 or 3).
    #[arg(long)]
    scenario: Option<u8>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides { out: self.out.clone(), seed: self.seed, plant: self.plant, scenario: self.scenario }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = match Cli::parse().command {
        Command::Run(c) => cmd_run(c.config.as_deref(), &c.overrides()),
        Command::Calibrate(c) => cmd_calibrate(c.config.as_deref(), &c.overrides()),
        Command::Sweep { common, periods } => cmd_sweep(common.config.as_deref(), &periods, &common.overrides()),
    };
    ExitCode::from(code as u8)
}
