//! `understory` — forest mapping pipeline CLI.
//!
//! Subcommands cover each pipeline stage (synthetic scene generation,
//! likelihood fields, SE(2) alignment, GNSS-fused pose-graph optimization,
//! GNSS corruption, detection geotagging, metrics) plus `pipeline`, which
//! chains them end to end and writes a reproducibility manifest.
//!
//! Exit codes: 0 success, 1 runtime/data error, 2 usage or config error.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub struct AppError {
    pub message: String,
    pub exit_code: i32,
}

impl AppError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            exit_code: 2,
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            exit_code: 1,
        }
    }
}

impl<E: std::error::Error> From<E> for AppError {
    fn from(e: E) -> Self {
        AppError::runtime(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "understory", version, about = "Forest mapping and invasive-species layer pipeline")]
struct Cli {
    /// TOML config file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic scenes with ground truth.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Build likelihood fields from aerial and terrestrial clouds.
    Fields(FieldsArgs),
    /// Estimate the aerial-terrestrial SE(2) alignment.
    Align(AlignArgs),
    /// Fuse odometry with GNSS in a robust pose graph.
    Pgo(PgoArgs),
    /// Corrupt a GNSS stream with spikes, dropouts, and offsets.
    CorruptGnss(CorruptArgs),
    /// Project detections into the map and export GIS layers.
    Geotag(GeotagArgs),
    /// Metrics: trajectory error and DBH relative error.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Run the full pipeline on a scene directory.
    Pipeline(PipelineArgs),
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Generate a forest scene: clouds, trajectories, GNSS, detections.
    Forest(SynthForestArgs),
}

#[derive(Args)]
struct SynthForestArgs {
    /// Number of trees.
    #[arg(long)]
    trees: Option<usize>,
    /// Extent in meters: width height.
    #[arg(long, num_args = 2, value_names = ["W", "H"])]
    extent: Option<Vec<f64>>,
    /// Point density, points per square meter.
    #[arg(long)]
    density: Option<f64>,
    /// Ground slope along +x.
    #[arg(long)]
    slope: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Ground-truth trajectory length, meters.
    #[arg(long)]
    traj_length: Option<f64>,
    /// Output directory for the scene files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FieldsArgs {
    /// Aerial (above-canopy) cloud PLY.
    #[arg(long)]
    aerial: PathBuf,
    /// Terrestrial (under-canopy) cloud PLY.
    #[arg(long)]
    terrestrial: PathBuf,
    /// Output directory for field dumps.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AlignArgs {
    /// Aerial cloud PLY.
    #[arg(long)]
    aerial: PathBuf,
    /// Terrestrial cloud PLY.
    #[arg(long)]
    terrestrial: PathBuf,
    /// Translation search range in x: min max (meters).
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], allow_hyphen_values = true)]
    tx_range: Option<Vec<f64>>,
    /// Translation search range in y: min max (meters).
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], allow_hyphen_values = true)]
    ty_range: Option<Vec<f64>>,
    /// Yaw search range: min max (degrees).
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], allow_hyphen_values = true)]
    psi_range_deg: Option<Vec<f64>>,
    /// Number of multi-start initializations.
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PgoArgs {
    /// Odometry trajectory CSV.
    #[arg(long)]
    odometry: PathBuf,
    /// GNSS stream CSV.
    #[arg(long)]
    gnss: Option<PathBuf>,
    /// GNSS integration mode: none, constant, covariance.
    #[arg(long)]
    mode: Option<String>,
    /// Robust kernel: squared, huber.
    #[arg(long)]
    kernel: Option<String>,
    /// Huber threshold.
    #[arg(long)]
    delta: Option<f64>,
    /// Anchor JSON (defaults to the first GNSS fix).
    #[arg(long)]
    anchor_file: Option<PathBuf>,
    /// Output fused trajectory CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CorruptArgs {
    /// Input GNSS CSV.
    #[arg(long = "in")]
    input: PathBuf,
    /// Per-fix spike probability.
    #[arg(long, default_value_t = 0.0)]
    spikes: f64,
    /// Dropout windows per minute.
    #[arg(long, default_value_t = 0.0)]
    dropouts: f64,
    /// Number of constant-offset segments.
    #[arg(long, default_value_t = 0)]
    offsets: usize,
    /// Covariance mode: deceptive, honest.
    #[arg(long, default_value = "deceptive")]
    mode: String,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output GNSS CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GeotagArgs {
    /// Map cloud PLY.
    #[arg(long)]
    map: PathBuf,
    /// Trajectory CSV (typically the fused output).
    #[arg(long)]
    trajectory: PathBuf,
    /// Detections JSON-lines.
    #[arg(long)]
    detections: PathBuf,
    /// Camera calibration JSON.
    #[arg(long)]
    camera: PathBuf,
    /// Anchor JSON for georeferencing.
    #[arg(long)]
    anchor_file: PathBuf,
    /// Association range, meters.
    #[arg(long)]
    max_range: Option<f64>,
    /// Output directory (overlay.ply, layer.tif, placemarks.kml).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Absolute trajectory error between two trajectories.
    Ate(EvalAteArgs),
    /// Mean relative error of DBH estimates.
    Mre(EvalMreArgs),
}

#[derive(Args)]
struct EvalAteArgs {
    /// Estimated trajectory CSV.
    #[arg(long)]
    est: PathBuf,
    /// Reference trajectory (trajectory CSV or GNSS CSV).
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Remove the best rigid transform before differencing.
    #[arg(long)]
    umeyama: bool,
    /// Optional output JSON path (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalMreArgs {
    /// DBH records CSV: id,dbh_est_m,dbh_gt_m.
    #[arg(long)]
    dbh: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    /// Scene directory (as produced by `synth forest`); falls back to
    /// `paths.scene_dir` from the config.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Output directory; falls back to `paths.out_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skip the aerial-terrestrial alignment stage.
    #[arg(long)]
    no_align: bool,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() {
    let cli = Cli::parse();
    let result = run(cli);
    if let Err(e) = result {
        eprintln!("error: {}", e.message);
        std::process::exit(e.exit_code);
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    let config = config::PipelineConfig::load_or_default(cli.config.as_deref())?;
    match cli.command {
        Command::Synth(SynthCommand::Forest(args)) => commands::synth::run(args, config),
        Command::Fields(args) => commands::fields::run(args, config),
        Command::Align(args) => commands::align::run(args, config),
        Command::Pgo(args) => commands::pgo::run(args, config),
        Command::CorruptGnss(args) => commands::corrupt::run(args, config),
        Command::Geotag(args) => commands::geotag::run(args, config),
        Command::Eval(EvalCommand::Ate(args)) => commands::eval::run_ate(args),
        Command::Eval(EvalCommand::Mre(args)) => commands::eval::run_mre(args),
        Command::Pipeline(args) => commands::pipeline::run(args, config),
    }
}
