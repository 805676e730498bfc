use std::path::PathBuf;
use std::process::ExitCode;

use chemotaxis_core::config::load_config;
use chemotaxis_core::output::{run_scenario, OutputOptions};
use chemotaxis_core::presets::PresetRegistry;
use chemotaxis_core::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chemotaxis", version, about = "Kinetic chemotaxis simulator on a 2D Cartesian grid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a JSON config.
    Run {
        config: PathBuf,
        /// output directory (default: out/<name>)
        #[arg(long)]
        out: Option<PathBuf>,
        /// write at most N frame sets
        #[arg(long, value_name = "N")]
        frames: Option<u64>,
        /// also dump the kinetic density f with each frame
        #[arg(long)]
        dump_f: bool,
        /// write classification.csv and ghost_weights.csv
        #[arg(long)]
        dump_classification: bool,
    },
    /// Built-in scenarios.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    /// Print a preset as a JSON config.
    Emit { name: String },
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config_error() {
        2
    } else if matches!(e, Error::Numerical(_) | Error::SolverDiverged { .. }) {
        3
    } else {
        1
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            config,
            out,
            frames,
            dump_f,
            dump_classification,
        } => {
            let cfg = load_config(&config)?;
            let out_dir = out.unwrap_or_else(|| PathBuf::from("out").join(&cfg.raw.name));
            let opts = OutputOptions {
                out_dir: out_dir.clone(),
                frames,
                dump_f,
                dump_classification,
            };
            let summary = run_scenario(cfg, &opts)?;
            println!(
                "{} steps, dt = {:.4e}, {} frame sets in {}",
                summary.steps,
                summary.dt,
                summary.frames.len(),
                out_dir.display()
            );
        }
        Command::Presets { action } => {
            let registry = PresetRegistry::default();
            match action {
                PresetAction::List => {
                    for p in registry.iter() {
                        println!("{:<8} {}", p.name(), p.summary());
                    }
                }
                PresetAction::Emit { name } => {
                    let raw = registry.get(&name)?.config();
                    println!("{}", serde_json::to_string_pretty(&raw)?);
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
