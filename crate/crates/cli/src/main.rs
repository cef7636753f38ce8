mod commands;
mod expr;
mod inputs;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] dyadic_young::Error),
    #[error("expression: {0}")]
    Expr(#[from] expr::ParseError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_validation() => 2,
            CliError::Core(dyadic_young::Error::Io(_)) | CliError::Io(_) | CliError::Json(_) => 3,
            CliError::Core(_) => 4,
            CliError::Expr(_) | CliError::Usage(_) => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Young integration against Hölder charges on dyadic cubes.
#[derive(Debug, Parser, Serialize)]
#[command(name = "dyadic-young", version)]
pub struct Cli {
    /// Dimension (taken from the charge file when one is given).
    #[arg(long, global = true)]
    pub d: Option<usize>,
    /// Charge depth N.
    #[arg(long, global = true)]
    pub depth: Option<u32>,
    /// Field resolution M (at least N).
    #[arg(long, global = true)]
    pub resolution: Option<u32>,
    /// Charge exponent γ.
    #[arg(long, global = true, default_value_t = 0.95)]
    pub gamma: f64,
    /// Declared Hölder exponent β of fields.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 1000)]
    pub trials: u64,
    /// Riemann tag rule: lower-left, center or average.
    #[arg(long, global = true, default_value = "lower-left")]
    pub tag: String,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "camelCase", tag = "name")]
pub enum Command {
    /// Faber-Schauder coefficients and Hölder profile of a charge.
    Analyze {
        #[arg(long)]
        charge: String,
    },
    /// Build a charge and write it as a .hchg file.
    Synth {
        #[arg(long)]
        charge: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Young integral of a field against a charge, with its Riemann table.
    Integrate {
        #[arg(long)]
        field: String,
        #[arg(long)]
        charge: String,
    },
    /// The indefinite integral f·ω as a charge.
    Indefinite {
        #[arg(long)]
        field: String,
        #[arg(long)]
        charge: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The charge dg_1 ∧ ... ∧ dg_d; pass --g once per component.
    Wedge {
        #[arg(long = "g", required = true)]
        g: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fractional Brownian sheet samples, increment charge and variance table.
    Fbm {
        /// Comma-separated Hurst parameters.
        #[arg(long)]
        hurst: String,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Duality bracket of a field with a charge.
    Bracket {
        #[arg(long)]
        field: String,
        #[arg(long)]
        charge: String,
    },
    /// Young integral over a range of charge depths.
    Convergence {
        #[arg(long)]
        field: String,
        #[arg(long)]
        charge: String,
        #[arg(long, default_value_t = 2)]
        from: u32,
        #[arg(long)]
        to: Option<u32>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
