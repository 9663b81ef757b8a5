use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fmap_core::alloc::CountingAllocator;

mod commands;

#[global_allocator]
static ALLOC: CountingAllocator = CountingAllocator;

/// Spectral shape matching with scalable soft functional maps.
///
/// Maps go from the target mesh (--tgt, S₂) to the source mesh (--src, S₁):
/// a vertex map file lists, for every target vertex, its source vertex, and
/// functional maps are K₂×K₁ matrices acting on source coefficients.
#[derive(Parser, Debug)]
#[command(name = "fmap", version, about)]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Directory holding cached eigenbases.
    #[arg(long, global = true, default_value = ".fmap_cache")]
    pub cache_dir: PathBuf,

    /// Always recompute eigenbases and write nothing to the cache.
    #[arg(long, global = true)]
    pub no_cache: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compute and store the Laplace–Beltrami eigenbasis of a mesh.
    Precompute {
        #[arg(long)]
        mesh: PathBuf,
        /// Number of eigenpairs.
        #[arg(long, default_value_t = 200)]
        k: usize,
        /// Output basis file (written in addition to the cache).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Match two meshes: WKS descriptors, nearest-neighbour initial map,
    /// ZoomOut refinement.
    Match {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        zoom: ZoomArgs,
        #[command(flatten)]
        desc: DescArgs,
        /// Output vertex map.
        #[arg(long)]
        out: PathBuf,
        /// Optional output for the final functional map.
        #[arg(long)]
        fmap_out: Option<PathBuf>,
    },
    /// Refine an existing vertex map with ZoomOut.
    Refine {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        zoom: ZoomArgs,
        /// Initial vertex map (target to source).
        #[arg(long)]
        init_map: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        fmap_out: Option<PathBuf>,
    },
    /// Optimise per-vertex features through differentiable ZoomOut.
    Optimize {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        zoom: ZoomArgs,
        #[command(flatten)]
        desc: DescArgs,
        /// Adam steps.
        #[arg(long, default_value_t = 200)]
        steps: usize,
        /// Adam learning rate (reference setting 1e-3).
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        /// Consistency weight at the first step.
        #[arg(long, default_value_t = 1e-4)]
        consist_start: f64,
        /// Consistency weight once the ramp is over.
        #[arg(long, default_value_t = 1e-1)]
        consist_end: f64,
        /// Length of the consistency ramp (default: all steps).
        #[arg(long)]
        ramp_steps: Option<usize>,
        /// Orthogonality loss weight.
        #[arg(long, default_value_t = 1.0)]
        w_orth: f64,
        /// Laplacian commutativity loss weight.
        #[arg(long, default_value_t = 1e2)]
        w_lap: f64,
        /// Source descriptors (FMAT01) instead of WKS.
        #[arg(long, requires = "desc_tgt")]
        desc_src: Option<PathBuf>,
        /// Target descriptors (FMAT01) instead of WKS.
        #[arg(long, requires = "desc_src")]
        desc_tgt: Option<PathBuf>,
        /// Writes PREFIX_f1.fmat, PREFIX_f2.fmat, PREFIX_map.txt,
        /// PREFIX_fmap.txt and PREFIX_loss.csv.
        #[arg(long)]
        out_prefix: PathBuf,
    },
    /// Geodesic error of a predicted map against ground truth (JSON on stdout).
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Mesh both maps point into (the source shape).
        #[arg(long)]
        mesh: PathBuf,
        /// PCK thresholds on the normalised error.
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.025,0.05,0.1")]
        pck: Vec<f64>,
        /// Optional per-vertex error CSV.
        #[arg(long)]
        errors_out: Option<PathBuf>,
    },
    /// Time hard ZoomOut on synthetic sphere pairs (CSV on stdout).
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "5000,20000,100000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[command(flatten)]
        zoom: ZoomArgs,
        /// Wall-time cap per repetition, in seconds.
        #[arg(long)]
        budget_secs: Option<f64>,
    },
}

#[derive(Args, Debug)]
pub struct PairArgs {
    /// Source mesh S₁ (OFF, OBJ or PLY).
    #[arg(long)]
    pub src: PathBuf,
    /// Target mesh S₂.
    #[arg(long)]
    pub tgt: PathBuf,
    /// Eigenpairs computed per mesh.
    #[arg(long, default_value_t = 200)]
    pub k: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Hard,
    Soft,
}

#[derive(Args, Debug)]
pub struct ZoomArgs {
    /// First basis size (reference setting 30).
    #[arg(long, default_value_t = 30)]
    pub k_init: usize,
    /// Last basis size (reference setting 130).
    #[arg(long, default_value_t = 130)]
    pub k_final: usize,
    /// Basis growth per iteration (reference setting 10).
    #[arg(long, default_value_t = 10)]
    pub step: usize,
    /// Soft-map blur (reference setting 1e-2).
    #[arg(long, default_value_t = 1e-2)]
    pub sigma: f64,
    /// Pointwise conversion inside ZoomOut (optimize always uses soft).
    #[arg(long, value_enum, default_value_t = Mode::Hard)]
    pub mode: Mode,
}

#[derive(Args, Debug)]
pub struct DescArgs {
    /// Feature columns taken from the normalised descriptors (reference setting 32).
    #[arg(long, default_value_t = 32)]
    pub p: usize,
    /// Number of WKS energies.
    #[arg(long, default_value_t = 128)]
    pub wks_q: usize,
    /// Eigenfunctions used by WKS.
    #[arg(long, default_value_t = 128)]
    pub wks_k: usize,
    /// WKS bandwidth in units of the energy spacing.
    #[arg(long, default_value_t = 7.0)]
    pub wks_variance: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("E_CONFIG: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}
