#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{CliError, CliResult, RunConfig, EXIT_CONFIG};

/// Viability analysis of the controlled Ross-Macdonald dengue model.
#[derive(Parser)]
#[command(name = "rmviab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory for CSV and SVG files.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Integrator tolerance (relative and absolute).
    #[arg(long, global = true, value_name = "FLOAT")]
    tol: Option<f64>,

    /// Override a configuration key; may be repeated.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Report the regime, both thresholds and M̄.
    Classify,
    /// Integrate the medium-regime frontier to frontier.csv and frontier.svg.
    Boundary,
    /// Simulate under a constant, piecewise or feedback policy to trajectory.csv.
    Simulate,
    /// Fit the epidemiological parameters to incidence or prevalence data.
    Fit,
    /// Classify every (u_max, H̄) cell of a grid to diagram.csv.
    Diagram,
    /// Write noiseless synthetic prevalence (and incidence) data.
    Synth,
}

fn load(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::new(
                    EXIT_CONFIG,
                    format!("cannot read config {}: {e}", path.display()),
                )
            })?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    for item in &cli.set {
        let (k, v) = item.split_once('=').ok_or_else(|| {
            CliError::new(EXIT_CONFIG, format!("--set `{item}`: expected KEY=VALUE"))
        })?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(tol) = cli.tol {
        cfg.set("tol", &tol.to_string())?;
    }
    if let Some(out) = &cli.out {
        cfg.set("out", &out.to_string_lossy())?;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> CliResult<()> {
    let cfg = load(cli)?;
    match cli.command {
        Command::Classify => commands::classify(&cfg),
        Command::Boundary => commands::boundary(&cfg),
        Command::Simulate => commands::simulate(&cfg),
        Command::Fit => commands::fit(&cfg),
        Command::Diagram => commands::diagram(&cfg),
        Command::Synth => commands::synth(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
