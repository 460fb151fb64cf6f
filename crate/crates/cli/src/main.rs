mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config keys or referenced files.
    Config(String),
    /// Failure while doing the work.
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

pub fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "toponav", version, about = "Image-goal navigation with topological maps on procedural floorplans")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate agents on single-goal episodes.
    Run(RunArgs),
    /// Evaluate agents on chains of goals in the same map.
    Sequential(SequentialArgs),
    /// Sample episodes and write them to a file.
    Episodes(EpisodesArgs),
    /// Export a ground-truth label dataset for one map.
    Label(LabelArgs),
    /// Write procedural floorplans as text maps.
    GenMaps(GenMapsArgs),
    /// Render a map with an optional trajectory and graph.
    Render(RenderArgs),
}

/// Options shared by all commands that need maps.
#[derive(Args, Debug, Clone, Default)]
pub struct MapArgs {
    /// TOML config file; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Map file (text, .png or .pgm); repeatable.
    #[arg(long = "map")]
    pub maps: Vec<PathBuf>,
    /// Number of procedural floorplans, used when no map file is given.
    #[arg(long)]
    pub floorplans: Option<usize>,
    /// Seed of the first floorplan.
    #[arg(long)]
    pub map_seed: Option<u64>,
    /// Cell size for image maps, in meters.
    #[arg(long)]
    pub resolution: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct NoiseArgs {
    /// Noise preset: default or zero.
    #[arg(long = "noise")]
    pub preset: Option<String>,
    /// Factor on all noise terms.
    #[arg(long)]
    pub noise_scale: Option<f64>,
    /// Extra factor on the odometry terms.
    #[arg(long)]
    pub sensor_scale: Option<f64>,
    #[arg(long)]
    pub noise_seed: Option<u64>,
    /// Score noise standard deviation.
    #[arg(long)]
    pub sigma_score: Option<f64>,
    #[arg(long)]
    pub p_flip_connection: Option<f64>,
    #[arg(long)]
    pub p_flip_direction: Option<f64>,
    #[arg(long)]
    pub corruption_seed: Option<u64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    #[command(flatten)]
    pub maps: MapArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Agent name, comma-separated list, or "all".
    #[arg(long)]
    pub agent: Option<String>,
    /// easy, medium, hard, a comma-separated list, or "all".
    #[arg(long)]
    pub difficulty: Option<String>,
    /// Episodes per difficulty.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Episode file to run instead of sampling.
    #[arg(long)]
    pub episodes: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Succeed as soon as the goal radius is entered.
    #[arg(long)]
    pub no_stop: bool,
    #[arg(long)]
    pub max_steps: Option<u32>,
    /// Write trajectory and graph dumps for the first N episodes.
    #[arg(long)]
    pub dump: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SequentialArgs {
    #[command(flatten)]
    pub maps: MapArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[arg(long)]
    pub agent: Option<String>,
    /// Number of goal chains.
    #[arg(long)]
    pub n: Option<usize>,
    /// Goals per chain.
    #[arg(long)]
    pub goals: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct EpisodesArgs {
    #[command(flatten)]
    pub maps: MapArgs,
    #[arg(long)]
    pub difficulty: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_steps: Option<u32>,
    /// Output file.
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Args, Debug, Clone, Default)]
pub struct LabelArgs {
    #[command(flatten)]
    pub maps: MapArgs,
    /// Number of sampled poses; all ordered pairs are labeled.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; gzip-compressed when it ends in .gz.
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GenMapsArgs {
    #[command(flatten)]
    pub maps: MapArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct RenderArgs {
    #[command(flatten)]
    pub maps: MapArgs,
    /// Trajectory dump (JSON).
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    /// Graph dump (JSON).
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Character raster instead of SVG.
    #[arg(long)]
    pub ascii: bool,
    /// Map cells per character for --ascii.
    #[arg(long, default_value_t = 4)]
    pub scale: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => commands::run(a),
        Command::Sequential(a) => commands::sequential(a),
        Command::Episodes(a) => commands::episodes(a),
        Command::Label(a) => commands::label(a),
        Command::GenMaps(a) => commands::gen_maps(a),
        Command::Render(a) => commands::render(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
