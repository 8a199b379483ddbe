//! `enduse-sim`: estimate appliance usage profiles from state data and
//! simulate whole-building end-use load profiles.
//!
//! Exit codes: 0 success, 2 input error, 3 configuration error,
//! 4 validation failure.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "enduse-sim",
    version,
    about = "Appliance-driven end-use load profile estimation and Monte Carlo simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract binary ON/OFF states from a power CSV and write a state CSV
    Ingest(IngestArgs),
    /// Estimate per-class usage profiles and diagnostics from a state CSV
    Estimate(EstimateArgs),
    /// Simulate the configured building and write the summary CSV
    Simulate(SimulateArgs),
    /// Run the self-validation suite (equivalence, consistency, variance)
    Validate(ValidateArgs),
    /// Generate a synthetic state CSV with a known ground truth
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Input power CSV (`appliance_id,date,step,watts`)
    #[arg(long)]
    pub power: PathBuf,
    /// ON threshold in watts; a step is ON iff power > threshold
    #[arg(long)]
    pub threshold: f64,
    /// Output state CSV path
    #[arg(long)]
    pub out_states: PathBuf,
    /// Assign this class id to every appliance (default: the appliance id)
    #[arg(long)]
    pub class: Option<String>,
    /// Keep weekend days instead of filtering to Monday..Friday
    #[arg(long)]
    pub keep_weekends: bool,
    /// Grid step width in minutes
    #[arg(long, default_value_t = 5)]
    pub step_minutes: u32,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    /// Run configuration (TOML)
    #[arg(long)]
    pub config: PathBuf,
    /// Input state CSV (overrides `[io].state_csv`)
    #[arg(long)]
    pub states: Option<PathBuf>,
    /// Output directory (overrides `[io].out_dir`)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Run configuration (TOML)
    #[arg(long)]
    pub config: PathBuf,
    /// Directory of profile documents (overrides `[io].profiles_dir`)
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    /// Output directory (overrides `[io].out_dir`)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed (overrides `[simulation].seed`)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo run count (overrides `[simulation].num_runs`)
    #[arg(long)]
    pub runs: Option<usize>,
    /// Also write SVG plots (per class and aggregate)
    #[arg(long)]
    pub plot: bool,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    /// Run configuration (TOML)
    #[arg(long)]
    pub config: PathBuf,
    /// Optional state CSV to validate (overrides `[io].state_csv`);
    /// otherwise a built-in synthetic dataset is used
    #[arg(long)]
    pub states: Option<PathBuf>,
    /// Output directory for the report (overrides `[io].out_dir`)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed (overrides `[simulation].seed`)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo run count (overrides `[simulation].num_runs`)
    #[arg(long)]
    pub runs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output state CSV path
    #[arg(long)]
    pub out_states: PathBuf,
    /// Appliance classes to generate
    #[arg(long, value_delimiter = ',', default_values_t = vec!["monitor".to_string(), "laptop".to_string(), "desktop".to_string()])]
    pub classes: Vec<String>,
    /// Appliances per class
    #[arg(long, default_value_t = 3)]
    pub appliances_per_class: usize,
    /// Days per appliance
    #[arg(long, default_value_t = 120)]
    pub days: usize,
    /// Master seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Grid step width in minutes
    #[arg(long, default_value_t = 5)]
    pub step_minutes: u32,
}

/// `ENDUSE_SIM_THREADS` caps simulation parallelism; 0 or unset = auto.
fn init_thread_pool() {
    if let Ok(value) = std::env::var("ENDUSE_SIM_THREADS") {
        match value.trim().parse::<usize>() {
            Ok(0) => {}
            Ok(n) => {
                if let Err(err) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("warning: could not configure {n} worker thread(s): {err}");
                }
            }
            Err(_) => eprintln!("warning: ignoring invalid ENDUSE_SIM_THREADS='{value}'"),
        }
    }
}

/// Map an error chain to the documented exit codes: configuration errors are
/// 3, everything else on the input path is 2.
fn classify_error(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<enduse_core::Error>() {
            return match core {
                enduse_core::Error::Config(_) => 3,
                _ => 2,
            };
        }
    }
    2
}

fn main() {
    let cli = Cli::parse();
    init_thread_pool();
    let result = match &cli.command {
        Command::Ingest(args) => commands::cmd_ingest(args),
        Command::Estimate(args) => commands::cmd_estimate(args),
        Command::Simulate(args) => commands::cmd_simulate(args),
        Command::Validate(args) => commands::cmd_validate(args),
        Command::Synth(args) => commands::cmd_synth(args),
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(classify_error(&err));
        }
    }
}
