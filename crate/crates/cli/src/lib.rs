//! Command-line driver: distances and barycenters in symmetric products, the
//! clustering-consistency experiment, and the redistricting pipeline.
//!
//! Every command writes one JSON document (to `--out` or stdout). Exit codes
//! are listed in [`error::exit`].

pub mod commands;
pub mod error;
pub mod input;
pub mod svg;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use symprod_core::clustering::{ClusterMethod, DatasetTag};
use symprod_core::redistrict::Weighting;
use symprod_core::{BarycenterParams, Mode};

pub use error::{exit, CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "symprod", version, about = "Barycenters of unordered k-tuples and ensemble labeling")]
pub struct Cli {
    #[command(flatten)]
    pub run: RunConfig,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every command.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Exponent of the W_p metric.
    #[arg(long, global = true, default_value_t = 2.0)]
    pub p: f64,
    /// Matching strategy: single or exhaustive.
    #[arg(long, global = true, default_value = "single")]
    pub mode: Mode,
    #[arg(long, global = true, default_value_t = 500)]
    pub max_iters: usize,
    /// Convergence tolerance on coordinate moves (default scales with the data).
    #[arg(long, global = true)]
    pub conv_tol: Option<f64>,
    /// Tolerance for equally optimal matchings.
    #[arg(long, global = true)]
    pub cost_tol: Option<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Sample points per district.
    #[arg(long = "M", global = true, default_value_t = symprod_core::redistrict::DEFAULT_M)]
    pub m: usize,
    #[arg(long, global = true, default_value = "population")]
    pub weighting: Weighting,
    /// Atoms per barycenter measure in the clustering experiment.
    #[arg(long, global = true, default_value_t = 50)]
    pub atoms: usize,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file for the JSON report (default: stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Exit 0 even when an iteration stops at max-iters.
    #[arg(long, global = true)]
    pub allow_partial: bool,
}

impl RunConfig {
    pub fn barycenter_params(&self) -> CliResult<BarycenterParams> {
        let params = BarycenterParams {
            p: self.p,
            mode: self.mode,
            max_iters: self.max_iters,
            conv_tol: self.conv_tol,
            cost_tol: self.cost_tol,
            ..BarycenterParams::default()
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// W_p distance and optimal matching between two configurations.
    Distance {
        input: PathBuf,
    },
    /// Local barycenter of an ensemble of configurations.
    Barycenter {
        input: PathBuf,
        /// Scatter plot of the barycenter components (planar data only).
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Subsample, cluster, and measure distances to the barycenter partition.
    ClusterConsistency(ClusterArgs),
    /// Redistricting ensemble analyses.
    Redistrict {
        #[command(subcommand)]
        action: RedistrictCommand,
    },
    /// Write a synthetic grid ensemble in the redistricting input format.
    ToyEnsemble {
        #[arg(long, default_value_t = 6)]
        width: usize,
        #[arg(long, default_value_t = 6)]
        height: usize,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 50)]
        plans: usize,
    },
}

#[derive(Debug, Clone, Args)]
pub struct ClusterArgs {
    #[arg(long, default_value = "two-blobs")]
    pub dataset: DatasetTag,
    /// Points in the full cloud.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value = "kmeans")]
    pub method: ClusterMethod,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 10)]
    pub subsamples: usize,
    #[arg(long, default_value_t = 200)]
    pub subsample_size: usize,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ElectionArgs {
    #[arg(long, default_value = symprod_core::redistrict::TOY_ELECTION)]
    pub election: String,
    #[arg(long, default_value = "A")]
    pub party_a: String,
    #[arg(long, default_value = "B")]
    pub party_b: String,
}

#[derive(Debug, Subcommand)]
pub enum RedistrictCommand {
    /// Ensemble barycenter, labels, vote-share table, optional heat maps.
    Barycenter {
        input: PathBuf,
        #[command(flatten)]
        election: ElectionArgs,
        /// Plan whose configuration seeds the iteration.
        #[arg(long, default_value_t = 0)]
        seed_plan: usize,
        /// Directory for per-label CSV heat maps.
        #[arg(long)]
        heatmap_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        resolution: usize,
    },
    /// Screen the input's candidate plans against the ensemble.
    Compare {
        input: PathBuf,
        #[command(flatten)]
        election: ElectionArgs,
        #[arg(long, default_value_t = 0)]
        seed_plan: usize,
        #[arg(long, default_value_t = symprod_core::redistrict::DEFAULT_OUTLIER_MARGIN)]
        outlier_margin: f64,
    },
    /// Discrepancy of labelings seeded from plans 0..n-seeds against plan 0.
    Stability {
        input: PathBuf,
        #[arg(long, default_value_t = 10)]
        n_seeds: usize,
    },
    /// Discrepancy between consecutive sample-size prefixes.
    Sensitivity {
        input: PathBuf,
        #[arg(long, default_value_t = 10)]
        m_max: usize,
        #[arg(long, default_value_t = 0)]
        seed_plan: usize,
    },
}

/// Execute a parsed command line.
pub fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.run.threads {
        if n == 0 {
            return Err(CliError::Parse("--threads must be positive".into()));
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let (report, partial) = commands::dispatch(cli)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    match &cli.run.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    match partial {
        Some(what) if !cli.run.allow_partial => Err(CliError::NotConverged(what)),
        _ => Ok(()),
    }
}
