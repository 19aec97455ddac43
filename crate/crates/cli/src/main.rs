//! `levy-liouville <subcommand> --config path.json [--out dir]`
//!
//! Exit codes: 0 complete, 2 negative verdict, 1 error (diagnostic JSON on stderr).

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use levy_liouville::LevyError;
use thiserror::Error;

use crate::config::{Command, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Levy(#[from] LevyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Levy(e) => match e {
                LevyError::InvalidParameter(_) => "invalid_parameter",
                LevyError::QuadratureDivergence(_) => "quadrature_divergence",
                LevyError::Resolution(_) => "resolution",
                LevyError::Growth { .. } => "growth",
                LevyError::MomentDivergence { .. } => "moment_divergence",
                LevyError::Alias { .. } => "alias",
                LevyError::Window(_) => "window",
                LevyError::Envelope(_) => "envelope",
                LevyError::UnsupportedFamily(_) => "unsupported_family",
                LevyError::Consistency(_) => "consistency",
                LevyError::Io(_) => "io",
                LevyError::Json(_) => "json",
            },
            CliError::Io(_) => "io",
            CliError::Json(_) => "json",
        }
    }
}

#[derive(Parser)]
#[command(name = "levy-liouville", version, about = "Numerics for Lévy generators and harmonic functions")]
struct Args {
    command: Command,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("LEVY_LIOUVILLE_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Config(format!("LEVY_LIOUVILLE_THREADS must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn execute(args: &Args) -> Result<bool, CliError> {
    configure_threads()?;
    let cfg = RunConfig::load(&args.config)?;
    if let Some(c) = cfg.command {
        if c != args.command {
            return Err(CliError::Config(format!(
                "config is for `{}` but `{}` was requested",
                c.name(),
                args.command.name()
            )));
        }
    }
    let outcome = commands::run(args.command, &cfg)?;
    let negative = outcome.negative;
    report::emit(args.command, &cfg, outcome, &args.out)?;
    Ok(negative)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            let diag = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{diag}");
            ExitCode::from(1)
        }
    }
}
