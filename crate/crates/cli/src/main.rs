//! `sgcoll`: collocation runs, convergence and truncation studies, the work
//! planner and analyticity diagnostics from a TOML configuration.

mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "sgcoll", version, about = "Sparse-grid collocation on randomly deformed domains")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Output directory for CSV files, the manifest and the node cache.
    #[arg(long, global = true, default_value = "sgcoll-out")]
    pub out: PathBuf,
    /// Worker threads for node solves (0 = one per hardware thread).
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    /// Reserved; the pipeline is deterministic.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Single collocation run at the configured grid and mesh.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Mean and variance errors against a high-level reference, per level.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        w_max: Option<u32>,
        #[arg(long, value_delimiter = ',')]
        ns_list: Option<Vec<usize>>,
    },
    /// Truncation errors against a higher-dimensional reference.
    Truncate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        ns_list: Option<Vec<usize>>,
    },
    /// Retained dimensions, knots and work needed for a tolerance.
    Plan {
        #[arg(long)]
        tol: f64,
        /// Bound constants are read from the `[bounds]` section.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        work_per_solve: f64,
    },
    /// Analyticity-region constants of the configured deformation model.
    Diag {
        #[arg(long)]
        config: PathBuf,
    },
    /// Prints the canonical form of a configuration (defaults if none).
    Config {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    match cli.command {
        Command::Run { config } => commands::run(g, &config),
        Command::Converge {
            config,
            w_max,
            ns_list,
        } => commands::converge(g, &config, w_max, ns_list),
        Command::Truncate { config, ns_list } => commands::truncate(g, &config, ns_list),
        Command::Plan {
            tol,
            config,
            work_per_solve,
        } => commands::plan(config.as_deref(), tol, work_per_solve),
        Command::Diag { config } => commands::diag(&config),
        Command::Config { config } => commands::print_config(config.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            let err = CliError::Usage(first.trim_start_matches("error: ").to_string());
            eprintln!("{}", err.line());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
