mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "nvmdse", version, about = "SRAM / STT-MRAM / SOT-MRAM last-level cache exploration")]
struct Cli {
    /// Run configuration (TOML). Defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Seed for synthetic profiles and generated traces, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Report per-item failures and continue instead of failing the run.
    #[arg(long, global = true)]
    keep_going: bool,
    /// Validate the configuration and inputs, write nothing.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit technology coefficients to the anchor set.
    Calibrate,
    /// EDAP-tune every selected kind over the capacity grid.
    Tune,
    /// Iso-capacity workload energy and EDP against the baseline.
    Isocap,
    /// Iso-area capacities, DRAM traffic and EDP with and without DRAM.
    Isoarea,
    /// Capacity scalability series and crossovers.
    Sweep,
    /// Calibrate, then run every analysis on the calibrated technology.
    All,
    /// Write the configured (or given) generated trace.
    GenTrace {
        /// Generator spec file; defaults to the configured trace spec.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = TraceFormat::Text)]
        format: TraceFormat,
    },
    /// Write the synthetic workload suite as a profile CSV.
    GenProfile {
        /// Also write a batch-size series for this network.
        #[arg(long)]
        batch_dnn: Option<String>,
        #[arg(long, value_delimiter = ',', default_values_t = [1u32, 4, 16, 64, 256])]
        batches: Vec<u32>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TraceFormat {
    Text,
    Binary,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] nvmdse::Error),
    #[error("{0} item(s) failed")]
    ItemFailures(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) | CliError::ItemFailures(_) => 1,
        }
    }
}

pub struct Options {
    pub keep_going: bool,
    pub dry_run: bool,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = cli.output {
        cfg.output = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let opts = Options {
        keep_going: cli.keep_going,
        dry_run: cli.dry_run,
    };
    let seed_override = cli.seed;
    match cli.command {
        Command::Calibrate => commands::calibrate(&cfg, &opts).map(|_| ()),
        Command::Tune => commands::tune(&cfg, &opts),
        Command::Isocap => commands::isocap(&cfg, &opts),
        Command::Isoarea => commands::isoarea(&cfg, &opts),
        Command::Sweep => commands::sweep(&cfg, &opts),
        Command::All => commands::all(&cfg, &opts),
        Command::GenTrace { spec, format } => commands::gen_trace(&cfg, &opts, spec, format, seed_override),
        Command::GenProfile { batch_dnn, batches } => commands::gen_profile(&cfg, &opts, batch_dnn, &batches),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Runtime(nvmdse::Error::CalibrationDiverged { residuals, .. }) = &e {
                for (name, err) in residuals {
                    eprintln!("  {name}: {:.2}%", 100.0 * err);
                }
            }
            ExitCode::from(e.exit_code())
        }
    }
}
