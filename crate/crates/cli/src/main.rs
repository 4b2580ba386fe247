//! `fixangle`: batch experiments for the fixed-angle scattering lab.
//!
//! Exit codes: 0 success, 2 configuration error, 3 a numerical check failed,
//! 4 runtime error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{Command, ExperimentConfig};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Check(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Check(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Check(m) => write!(f, "check failed: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "fixangle",
    version,
    about = "Fixed-angle scattering experiments"
)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// TOML experiment file; defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(short, long)]
    jobs: Option<usize>,
    /// Output directory; FIXANGLE_OUTPUT takes precedence.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(args: &Args) -> Result<Vec<String>, CliError> {
    let mut cfg = ExperimentConfig::load(args.config.as_deref())?;
    if let Some(o) = &args.output {
        cfg.output = Some(o.clone());
    }
    if let Some(j) = args.jobs {
        if j == 0 {
            return Err(CliError::Config("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    commands::run(args.command, &cfg)
}
