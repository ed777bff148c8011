//! `kl2clust` command-line front end.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kl2clust::MetricKind;

/// Exit status for a batch where some inputs failed and others succeeded.
pub const EXIT_PARTIAL: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "kl2clust", version, about = "Length-aware speaker segment clustering")]
pub struct Cli {
    /// Maximum worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert WAV files (or directories of them) into MFCC feature CSVs.
    Extract(ExtractArgs),
    /// Simulate a correction surface from same-distribution sample pairs.
    Simulate(SimulateArgs),
    /// Compute a pairwise distance matrix over feature files.
    Distance(DistanceArgs),
    /// Cluster a distance matrix and write the dendrogram and assignment.
    Cluster(ClusterArgs),
    /// Mean distance between random subsets of one feature file.
    Sweep(SweepArgs),
    /// Generate a labeled synthetic dataset.
    Synth(SynthArgs),
    /// Score a cluster assignment against a manifest.
    Evaluate(EvaluateArgs),
    /// Export a surface file as long-format CSV.
    SurfaceExport(SurfaceExportArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// WAV files or directories containing them.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 25.0)]
    pub frame_ms: f64,
    #[arg(long, default_value_t = 10.0)]
    pub hop_ms: f64,
    #[arg(long, default_value_t = 0.97)]
    pub preemphasis: f64,
    #[arg(long, default_value_t = 26)]
    pub mel_filters: usize,
    #[arg(long, default_value_t = 13)]
    pub num_ceps: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value = "kl2")]
    pub metric: MetricKind,
    #[arg(long, default_value_t = 13)]
    pub dim: usize,
    /// Comma-separated, strictly increasing sample counts.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = kl2clust::vq::DEFAULT_CODEBOOK_K)]
    pub codebook_k: usize,
    /// Output surface file (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DistanceArgs {
    /// Feature CSV files; ignored when --manifest is given.
    pub features: Vec<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value = "kl2")]
    pub metric: MetricKind,
    /// Correction surface; distances are divided by its lookup.
    #[arg(long)]
    pub surface: Option<PathBuf>,
    #[arg(long, default_value_t = kl2clust::vq::DEFAULT_CODEBOOK_K)]
    pub codebook_k: usize,
    /// Codebook training seed (VQ metrics).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Distance matrix CSV.
    pub matrix: PathBuf,
    #[arg(long, conflicts_with = "k", required_unless_present = "k")]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Receives dendrogram.json, dendrogram.nwk and assignment.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub features: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub subset_lengths: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "kl2")]
    pub metric: MetricKind,
    #[arg(long, default_value_t = kl2clust::vq::DEFAULT_CODEBOOK_K)]
    pub codebook_k: usize,
    /// Draw contiguous spans instead of random rows.
    #[arg(long)]
    pub contiguous: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub speakers: usize,
    #[arg(long, default_value_t = 13)]
    pub dim: usize,
    #[arg(long, default_value_t = 4)]
    pub segments_per_speaker: usize,
    #[arg(long, default_value_t = 600)]
    pub min_frames: usize,
    #[arg(long, default_value_t = 18_900)]
    pub max_frames: usize,
    #[arg(long, default_value_t = 1.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Assignment CSV written by `cluster`.
    pub assignment: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Debug, Args)]
pub struct SurfaceExportArgs {
    pub surface: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::FAILURE;
        }
    };
    match pool.install(|| commands::run(cli.command)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
