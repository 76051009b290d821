use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gapcond::cli::{export_mesh, run, Registry, RunError, RunOptions};

#[derive(Parser)]
#[command(name = "gapcond", version, about = "Gradient estimates for closely spaced perfect conductors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in the config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override a value, e.g. `--set geometry.epsilon=1e-3`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory, overriding `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mesh the configured geometry at `geometry.epsilon` and dump it.
    ExportMesh {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// List the registered experiments.
    List,
}

fn dispatch(cli: Cli) -> Result<(), RunError> {
    let registry = Registry::standard();
    match cli.command {
        Command::Run { config, set, jobs, out } => {
            let paths = run(&RunOptions { config, overrides: set, jobs, out }, &registry)?;
            for p in paths {
                println!("{}", p.display());
            }
        }
        Command::ExportMesh { config, set, out } => {
            export_mesh(&config, &set, &out)?;
            println!("{}", out.display());
        }
        Command::List => {
            for name in registry.names() {
                println!("{name:<12}{}", registry.get(name).map_or("", |e| e.summary()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gapcond: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
