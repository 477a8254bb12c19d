use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use hjgraph_core::cli::{run, Command};
use hjgraph_core::scenario::{load_scenario_with, Orientation, Overrides};
use hjgraph_core::Error;

/// Hamilton-Jacobi equations on metric graphs: solve, verify, transform,
/// converge.
#[derive(Parser)]
#[command(name = "hjgraph", version, about)]
struct Cli {
    /// solve | verify | transform | converge
    command: String,
    /// Path to the scenario file
    scenario: PathBuf,
    /// Output directory (default: scenario name + ".out")
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the verification seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the optimization orientation
    #[arg(long, value_parser = parse_orientation)]
    orientation: Option<Orientation>,
}

fn parse_orientation(s: &str) -> Result<Orientation, String> {
    match s {
        "min" => Ok(Orientation::Min),
        "max" => Ok(Orientation::Max),
        _ => Err("expected min | max".into()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed (report written)");
            ExitCode::from(1)
        }
        Err(e @ Error::Internal(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: &Cli) -> hjgraph_core::Result<bool> {
    let command = Command::parse(&cli.command)?;
    let scenario = load_scenario_with(
        &cli.scenario,
        Overrides {
            seed: cli.seed,
            orientation: cli.orientation,
        },
    )?;
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.out", scenario.name)));
    run(command, &scenario, &out)
}
