//! `rotmap`: stand-level butt-rot mapping from harvester production files,
//! predictor rasters and forest segments.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error.

mod commands;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rotmap", version, about = "Stand-level butt-rot volume mapping workflow")]
pub struct Cli {
    /// Run configuration (TOML); flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Master seed for every random stream [default: 1]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for forest training and CV folds [default: all cores]
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scenario: production files, rasters, segments, truth
    Synth(SynthArgs),
    /// Parse production files into the tree table (CSV)
    Ingest(IngestArgs),
    /// Delineate harvested stands from trees and segments (GeoJSON)
    Delineate(DelineateArgs),
    /// Build the stand table of response and predictors (CSV)
    Features(FeaturesArgs),
    /// Fit the calibrated forest on the full stand table (model JSON)
    Train(TrainArgs),
    /// Cross-validate by stand or by spatial cluster (report JSON + CSV)
    Cv(CvArgs),
    /// Predict butt-rot volume for segments (GeoJSON)
    Map(MapArgs),
    /// Variable importance and Spearman correlations (CSV)
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Scenario settings (TOML); flags below override it
    #[arg(long, value_name = "FILE")]
    pub scenario: Option<PathBuf>,
    /// Number of spatial clusters [default: 5]
    #[arg(long)]
    pub clusters: Option<usize>,
    /// Harvested stands per cluster [default: 6]
    #[arg(long)]
    pub stands_per_cluster: Option<usize>,
    /// Standard deviation of the cluster shift in butt-rot volume, m3/ha [default: 10]
    #[arg(long)]
    pub cluster_effect_sd: Option<f64>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Production files, or directories searched for *.hpr
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Tree table to write [default: paths.trees from the config]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct SiteArgs {
    /// Forest segments (GeoJSON) [default: paths.segments from the config]
    #[arg(long)]
    pub segments: Option<PathBuf>,
    /// Raster manifest (TOML) [default: paths.rasters from the config]
    #[arg(long)]
    pub rasters: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DelineateArgs {
    /// Tree table [default: paths.trees from the config]
    #[arg(long)]
    pub trees: Option<PathBuf>,
    #[command(flatten)]
    pub site: SiteArgs,
    /// Alpha-shape radius, m [default: 25]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Buffer around the alpha shape, m [default: 2]
    #[arg(long)]
    pub buffer: Option<f64>,
    /// Minimum stand area, ha [default: 0.3]
    #[arg(long)]
    pub min_area: Option<f64>,
    /// Minimum stems per stand [default: 30]
    #[arg(long)]
    pub min_stems: Option<usize>,
    /// Minimum spruce share of volume, percent [default: 50]
    #[arg(long)]
    pub min_spruce: Option<f64>,
    /// Stands to write [default: <out_dir>/stands.geojson]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Delineated stands [default: <out_dir>/stands.geojson]
    #[arg(long)]
    pub stands: Option<PathBuf>,
    /// Tree table [default: paths.trees from the config]
    #[arg(long)]
    pub trees: Option<PathBuf>,
    /// Raster manifest (TOML) [default: paths.rasters from the config]
    #[arg(long)]
    pub rasters: Option<PathBuf>,
    /// Stand table to write [default: <out_dir>/stands.csv]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Vars {
    /// Every predictor, harvester variables included
    All,
    /// Predictors available before harvest
    Prior,
}

impl Vars {
    pub fn set(self) -> rotmap::stands::VariableSet {
        match self {
            Vars::All => rotmap::stands::VariableSet::All,
            Vars::Prior => rotmap::stands::VariableSet::PriorToHarvest,
        }
    }
}

#[derive(Debug, Args, Clone, Default)]
pub struct ForestArgs {
    /// Trees per forest [default: 500]
    #[arg(long)]
    pub ntree: Option<usize>,
    /// Minimum rows in a leaf [default: 5]
    #[arg(long)]
    pub nodesize: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Stand table [default: <out_dir>/stands.csv]
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Predictor set
    #[arg(long, value_enum, default_value = "prior")]
    pub vars: Vars,
    #[command(flatten)]
    pub forest: ForestArgs,
    /// Model to write [default: <out_dir>/model_<vars>.json]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Strategy {
    /// Leave one stand out
    Stand,
    /// Leave one k-means cluster of stand centroids out
    Cluster,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    /// Stand table [default: <out_dir>/stands.csv]
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Hold-out unit
    #[arg(long, value_enum, default_value = "stand")]
    pub strategy: Strategy,
    /// Predictor set
    #[arg(long, value_enum, default_value = "all")]
    pub vars: Vars,
    #[command(flatten)]
    pub forest: ForestArgs,
    /// Cluster count [default: max(2, round(n / 11))]
    #[arg(long)]
    pub k: Option<usize>,
    /// Smallest cluster kept; smaller ones are merged [default: 5]
    #[arg(long)]
    pub min_cluster: Option<usize>,
    /// Report to write; per-stand predictions go next to it as .csv
    /// [default: <out_dir>/cv_<strategy>_<vars>.json]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    /// Model JSON from `train` (prior-to-harvest variables)
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub site: SiteArgs,
    /// Map to write [default: <out_dir>/map.geojson]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Stand table [default: <out_dir>/stands.csv]
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[command(flatten)]
    pub forest: ForestArgs,
    /// Directory for importance.csv and spearman.csv [default: <out_dir>]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, record| writeln!(buf, "level={} {}", record.level().as_str().to_lowercase(), record.args()))
        .target(env_logger::Target::Stderr)
        .init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    init_logging();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
