use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pursuit_rl::engine::{self, metrics};
use pursuit_rl::io::{self, all_formats, export_run, load_scenario, parse_formats};
use pursuit_rl::Error;

#[derive(Parser)]
#[command(
    name = "pursuit-rl",
    version,
    about = "Learning pursuers versus an evading vessel"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write its artifacts.
    Run {
        scenario: PathBuf,
        /// Output directory (default: $PURSUIT_RL_OUT or ./runs, plus the scenario name).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated list from csv, kml, geojson.
        #[arg(long, default_value = "csv,kml,geojson")]
        formats: String,
    },
    /// Parse and check a scenario file without running it.
    Validate { scenario: PathBuf },
    /// Bundled scenarios.
    Scenarios {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Subcommand)]
enum ScenarioAction {
    /// Write the bundled scenario files.
    Ship {
        #[arg(long, default_value = "scenarios")]
        out: PathBuf,
    },
}

enum Failure {
    Input(Error),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Input(e)
        } else {
            Failure::Runtime(e)
        }
    }
}

fn load(path: &Path) -> Result<engine::ScenarioConfig, Failure> {
    // An unreadable scenario is bad input, not a failed run.
    load_scenario(path).map_err(Failure::Input)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { scenario } => {
            let config = load(&scenario)?;
            println!(
                "{}: ok ({} pursuers, {} events)",
                scenario.display(),
                config.pursuers.len(),
                config.events.len()
            );
        }
        Command::Run {
            scenario,
            out,
            seed,
            formats,
        } => {
            let formats = if formats.trim().is_empty() {
                all_formats()
            } else {
                parse_formats(&formats)?
            };
            let mut config = load(&scenario)?;
            if let Some(seed) = seed {
                config.seed = seed;
                config.learner.rng_seed = seed;
            }
            let out = out.unwrap_or_else(|| {
                let stem = scenario
                    .file_stem()
                    .map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
                io::default_out_dir().join(stem)
            });
            let record = engine::run(&config)?;
            let summary = metrics(&record);
            for p in &summary.pursuers {
                match p.capture_time_s {
                    Some(t) => println!("pursuer {}: captured after {:.1} min", p.id, t / 60.0),
                    None => println!(
                        "pursuer {}: no capture, closest approach {:.0} m",
                        p.id, p.min_distance_m
                    ),
                }
            }
            for path in export_run(&record, &formats, &out).map_err(Failure::Runtime)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Scenarios {
            action: ScenarioAction::Ship { out },
        } => {
            for path in io::ship_scenarios(&out).map_err(Failure::Runtime)? {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
