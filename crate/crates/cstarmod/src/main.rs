use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cstarmod::report::{Format, Report};
use cstarmod::run::{fuzz, gallery, run, CheckSelection, FuzzConfig, RunOptions};
use cstarmod::scenario::{CheckKind, Scenario};

/// Workbench for module maps that need not admit adjoints: modularity
/// solving, moduli, polar factors, and structured refusals when a
/// decomposition cannot exist.
#[derive(Parser)]
#[command(name = "cstarmod", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format. Machine output follows a documented line schema and is
    /// byte-stable across runs.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Human)]
    format: OutputFormat,
    /// Relative tolerance for verdicts; overrides the scenario file and the
    /// CSTARMOD_TOLERANCE environment variable.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Number of sample points for function backend grids.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Stop after the first section with a failing check.
    #[arg(long, global = true)]
    fail_fast: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Human,
    Machine,
}

#[derive(Subcommand)]
enum Command {
    /// Run the checks declared in a scenario file.
    Check { file: PathBuf },
    /// Polar analysis of every operator in a scenario file.
    Polar { file: PathBuf },
    /// Kernel and range invariants of every operator in a scenario file.
    Invariants { file: PathBuf },
    /// Run the built-in scenario gallery.
    Gallery,
    /// Seeded random operators cross-checked against classical oracles.
    Fuzz {
        /// Seed for the deterministic generator; each case derives its own
        /// stream from it.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of random operators to draw.
        #[arg(long, default_value_t = 50)]
        count: usize,
        /// Block sizes of the coefficient algebra, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "2")]
        algebra: Vec<usize>,
        /// Rank of the free module the operators act on.
        #[arg(long, default_value_t = 3)]
        rank: usize,
    },
}

fn load_scenario(path: &PathBuf) -> Result<Scenario, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    Scenario::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let options = RunOptions {
        tolerance: cli.tolerance,
        grid: cli.grid,
        fail_fast: cli.fail_fast,
    };
    let format = match cli.format {
        OutputFormat::Human => Format::Human,
        OutputFormat::Machine => Format::Machine,
    };

    let reports: Result<Vec<Report>, String> = match &cli.command {
        Command::Check { file } => load_scenario(file).and_then(|sc| {
            run(&sc, &options, CheckSelection::Declared)
                .map(|r| vec![r])
                .map_err(|e| e.to_string())
        }),
        Command::Polar { file } => load_scenario(file).and_then(|sc| {
            run(&sc, &options, CheckSelection::Forced(CheckKind::Polar))
                .map(|r| vec![r])
                .map_err(|e| e.to_string())
        }),
        Command::Invariants { file } => load_scenario(file).and_then(|sc| {
            run(&sc, &options, CheckSelection::Forced(CheckKind::Invariants))
                .map(|r| vec![r])
                .map_err(|e| e.to_string())
        }),
        Command::Gallery => gallery(&options).map_err(|e| e.to_string()),
        Command::Fuzz { seed, count, algebra, rank } => {
            let config = FuzzConfig {
                seed: *seed,
                count: *count,
                algebra: algebra.clone(),
                rank: *rank,
                tolerance: cli.tolerance,
                fail_fast: cli.fail_fast,
            };
            fuzz(&config).map(|r| vec![r]).map_err(|e| e.to_string())
        }
    };

    match reports {
        Ok(reports) => {
            let mut all_passed = true;
            for report in &reports {
                print!("{}", report.render(format));
                all_passed &= report.passed();
            }
            if all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
