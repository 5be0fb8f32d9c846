//! The `simready` command line.

mod commands;
pub mod config;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

pub use commands::run;

#[derive(Debug, Parser)]
#[command(name = "simready", version, about = "Simulation-ready asset tools")]
pub struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a test scenario on an asset and write a `.trj` trajectory.
    Simulate(SimulateArgs),
    /// Compare two trajectories or two assets.
    Metrics(MetricsArgs),
    /// Annotate an object description with materials through a chat model.
    Annotate(AnnotateArgs),
    /// Serve the review API and the workbench bundle.
    Serve(ServeArgs),
    /// Rewrite an asset in the text or binary encoding.
    Convert(ConvertArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML run configuration.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Asset file (.sra).
    #[arg(long)]
    pub asset: Option<PathBuf>,
    /// Scenario with default parameters: drop, throw, tilt, drag or wind.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Trajectory output path.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Also render every frame as PNG into this directory.
    #[arg(long)]
    pub frames_dir: Option<PathBuf>,
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Simulated seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub fps: Option<f64>,
    /// Fixed timestep in seconds instead of the adaptive one.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Reproducible output regardless of worker count.
    #[arg(long)]
    pub deterministic: bool,
    /// Print the fully resolved configuration and exit.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Predicted trajectory (.trj) or asset (.sra).
    pub pred: PathBuf,
    /// Reference of the same kind.
    pub truth: PathBuf,
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// F-score threshold.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub iou_resolution: Option<usize>,
    /// Write a JSON record of inputs and results.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Print JSON instead of `name: value` lines.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    /// Object description (JSON).
    pub description: PathBuf,
    /// Use the offline mock model instead of SIMREADY_VLM_URL.
    #[arg(long)]
    pub mock: bool,
    /// Canned mock responses (`<kind>.txt`, `<shape>.<kind>.txt`).
    #[arg(long, requires = "mock")]
    pub fixtures: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Strict)]
    pub mode: Mode,
    /// Session id; defaults to the description file name.
    #[arg(long)]
    pub id: Option<String>,
    /// Session record path; defaults to `<data dir>/sessions/<id>.json`.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = "SIMREADY_DATA_DIR", default_value = "simready-data")]
    pub data_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Strict,
    Lenient,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// 0 picks a free port.
    #[arg(short, long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, env = "SIMREADY_DATA_DIR", default_value = "simready-data")]
    pub data_dir: PathBuf,
    /// Built workbench bundle to serve at `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    #[arg(long, default_value_t = simready_service::DEFAULT_MAX_JOBS)]
    pub max_jobs: usize,
    /// Default simulation settings for jobs (the `[sim]` table of a run config).
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub mock: bool,
    #[arg(long, requires = "mock")]
    pub fixtures: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    #[arg(long, value_enum)]
    pub to: Encoding,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Encoding {
    Text,
    Binary,
}

pub fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        _ => tracing::Level::DEBUG,
    };
    let _ = tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .try_init();
}
