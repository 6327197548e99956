//! `bellcorr` command-line driver.
//!
//! Every subcommand reads an optional JSON config (`--config`), applies
//! `--set key=value` overrides and its own flags, prints a JSON report on
//! stdout and writes CSV/SVG artefacts into `--out` when given. Angles are
//! in degrees. Exit codes: 0 success, 2 configuration error, 3 empty
//! result, 4 numerical failure.

mod commands;
mod config;
mod output;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError { code: 2, message: msg.into() }
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError { code: 2, message: format!("{}: {e}", path.display()) }
    }
}

impl From<bellcorr::Error> for CliError {
    fn from(e: bellcorr::Error) -> Self {
        use bellcorr::Error::*;
        let code = match e {
            InvalidArgument(_) | ResourceLimit(_) => 2,
            EmptyResult(_) => 3,
            _ => 4,
        };
        CliError { code, message: e.to_string() }
    }
}

#[derive(Parser)]
#[command(name = "bellcorr", version, about = "Bell correlation witnesses for collective spin ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key (dotted paths reach nested objects).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Directory for CSV/SVG/JSON artefacts.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Witness as a function of the angle between a and n.
    WitnessCurve {
        #[command(flatten)]
        common: Common,
    },
    /// Seeded emulation of the squeezing and Rabi runs with full analysis.
    Emulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit C sin(τ₀ + γτ + δτ²) to a CSV of durations and ratios or shots.
    FitRabi {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Classical minimum of the inequality for N parties.
    LhvCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<u64>,
    },
    /// Finite-statistics adversary at a given angle.
    Adversary {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
        /// Degrees.
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        m: Option<u64>,
    },
    /// Probability mass of the (C_b, ζ²) estimate inside a region.
    Overlap {
        #[command(flatten)]
        common: Common,
        /// all, bell or k_producible.
        #[arg(long)]
        region: Option<String>,
        #[arg(long)]
        k: Option<u32>,
    },
    /// k-producibility boundary in the (contrast, ζ²) plane.
    Producibility {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: Option<u32>,
    },
    /// Husimi function of a coherent or twisted state on a polar grid.
    Husimi {
        #[command(flatten)]
        common: Common,
    },
}

fn overrides(common: &Common, flags: Vec<(&str, Option<Value>)>) -> Result<Vec<(String, Value)>, CliError> {
    let mut o: Vec<(String, Value)> = common.set.iter().map(|s| config::parse_override(s)).collect::<Result<_, _>>()?;
    o.extend(flags.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
    if let Some(out) = &common.out {
        o.push(("output_dir".into(), Value::String(out.display().to_string())));
    }
    Ok(o)
}

fn j<T: Into<Value>>(v: Option<T>) -> Option<Value> {
    v.map(Into::into)
}

fn emit<T: Serialize>(r: Result<T, CliError>) -> Result<String, CliError> {
    r.map(|v| serde_json::to_string_pretty(&v).expect("report serialises"))
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::WitnessCurve { common } => {
            let o = overrides(&common, vec![])?;
            emit(commands::witness_curve_cmd(config::load(common.config.as_deref(), &o)?))
        }
        Command::Emulate { common, seed } => {
            let o = overrides(&common, vec![("seed", j(seed))])?;
            emit(commands::emulate_cmd(config::load(common.config.as_deref(), &o)?))
        }
        Command::FitRabi { common, input } => {
            let o = overrides(&common, vec![("input", j(input.map(|p| p.display().to_string())))])?;
            emit(commands::fit_cmd(config::load(common.config.as_deref(), &o)?))
        }
        Command::LhvCheck { common, n } => {
            let o = overrides(&common, vec![("n", j(n))])?;
            emit(commands::lhv_cmd(config::load(common.config.as_deref(), &o)?))
        }
        Command::Adversary { common, n, theta, m } => {
            let o = overrides(&common, vec![("n", j(n)), ("theta_deg", j(theta)), ("m", j(m))])?;
            emit(commands::adversary_cmd(config::load(common.config.as_deref(), &o)?))
        }
        Command::Overlap { common, region, k } => {
            let o = overrides(&common, vec![("region", j(region)), ("k", j(k))])?;
            emit(commands::overlap_cmd(config::load(common.config.as_deref(), &o)?))
        }
        Command::Producibility { common, k } => {
            let o = overrides(&common, vec![("k", j(k))])?;
            emit(commands::producibility_cmd(config::load(common.config.as_deref(), &o)?))
        }
        Command::Husimi { common } => {
            let o = overrides(&common, vec![])?;
            emit(commands::husimi_cmd(config::load(common.config.as_deref(), &o)?))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(json) => {
            use std::io::Write;
            // a closed pipe downstream is not an error of ours
            let _ = writeln!(std::io::stdout().lock(), "{json}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
