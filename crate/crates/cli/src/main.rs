use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use oscmeas_cli::{execute, load, CliError, Command, Options};

#[derive(Parser)]
#[command(
    name = "oscmeas",
    version,
    about = "Time-unresolved detection probabilities for oscillating particles"
)]
struct Cli {
    #[command(subcommand)]
    command: Action,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Relative quadrature tolerance; overrides `run.quadrature_tolerance`.
    #[arg(long = "quadrature-tol")]
    quadrature_tol: Option<f64>,
}

#[derive(Subcommand)]
enum Action {
    /// Check a scenario file and print the resolved parameters.
    Validate(Common),
    /// Evaluate detection curves for the configured methods.
    Density(Common),
    /// Evaluate and fit all four methods, reporting frequency ratios.
    Baselines(Common),
    /// Evaluate and fit the configured methods.
    Fit(Common),
    /// Fit the wavenumber at each configured threshold.
    Scan(Common),
}

fn run(command: Command, common: Common) -> Result<(), CliError> {
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    }
    let options = Options {
        out: common.out,
        quadrature_tol: common.quadrature_tol,
    };
    let file = load(&common.scenario, &options)?;
    let summary = execute(command, &file, &options)?;
    if command == Command::Validate {
        let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))?;
        println!("{json}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Action::Validate(c) => (Command::Validate, c),
        Action::Density(c) => (Command::Density, c),
        Action::Baselines(c) => (Command::Baselines, c),
        Action::Fit(c) => (Command::Fit, c),
        Action::Scan(c) => (Command::Scan, c),
    };
    match run(command, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
