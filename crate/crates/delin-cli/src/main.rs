//! Command-line pipeline: tubularity map -> overcomplete graph -> scored
//! paths -> evaluation, plus sample generation and synthetic fixtures.
//!
//! Exit codes: 0 success, 2 input error, 3 config error, 4 external-scorer
//! protocol error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use delin_core::graph::{build_overcomplete_graph, DelinGraph};
use delin_core::metrics::evaluate;
use delin_core::raster::ScalarGrid;
use delin_core::samples::{generate_samples, save_manifest, SampleParams};
use delin_core::scoring::{prune, score_graph, ScoreError};
use delin_core::synth::{gen_network, render_mask, render_tubularity, SynthParams};

mod config;

use config::Config;

const EXIT_INPUT: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_SCORER: u8 = 4;

#[derive(Parser)]
#[command(name = "delin", about = "Curvilinear-network delineation pipeline", version)]
struct Cli {
    /// Number of worker threads for per-pair search and scoring.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// Parameter profile: `roads` (d=250, k=1.1, R=40) or `axons` (d=30, k=1.5, R=10).
    #[arg(long)]
    profile: Option<String>,
    /// key = value config file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Binarization threshold t.
    #[arg(short = 't', long)]
    threshold: Option<f64>,
    /// Grid sampling interval d in pixels.
    #[arg(long)]
    d: Option<i64>,
    /// Exclusion-zone radius epsilon in pixels.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Connection radius factor k (pairs within k*d are connected).
    #[arg(long)]
    k: Option<f64>,
    /// Minimum skeleton branch length kept by spur pruning.
    #[arg(long)]
    min_spur: Option<usize>,
    /// A* per-pixel cost base.
    #[arg(long)]
    base: Option<f64>,
    /// A* heuristic weight.
    #[arg(long)]
    hweight: Option<f64>,
    /// Grid connectivity (4 or 8).
    #[arg(long)]
    connectivity: Option<u8>,
    /// Search-region padding in pixels.
    #[arg(long)]
    search_margin: Option<i64>,
    /// Expansion cap per search.
    #[arg(long)]
    max_expansions: Option<usize>,
    /// Score threshold tau for pruning.
    #[arg(long)]
    tau: Option<f64>,
    /// Ground-truth dilation tolerance rho for sample labeling.
    #[arg(long)]
    rho: Option<f64>,
    /// Patch side length for cropping and external scoring.
    #[arg(long)]
    patch_size: Option<usize>,
    /// Matching radius R for evaluation.
    #[arg(short = 'R', long)]
    radius: Option<f64>,
    /// Distance thresholds m: comma list (`1,2,3`) or range (`1..10`).
    #[arg(short = 'm', long)]
    m: Option<String>,
    /// Match gt significant points against `all` predicted nodes or `significant` only.
    #[arg(long, value_name = "all|significant")]
    r#match: Option<String>,
    /// Scorer: `mean`, `quantile:<q>`, or `external:<cmd>[:<arg>...]`.
    #[arg(long)]
    scorer: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the overcomplete graph from a tubularity PGM.
    Extract {
        /// Input tubularity map (binary PGM).
        tubularity: PathBuf,
        /// Output graph JSON.
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Score every edge of a graph and prune below tau.
    Score {
        /// Input graph JSON.
        graph: PathBuf,
        /// Tubularity map the graph was extracted from.
        tubularity: PathBuf,
        /// Output scored-and-pruned graph JSON.
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Evaluate a predicted graph against a ground-truth graph.
    Evaluate {
        /// Predicted graph JSON.
        pred: PathBuf,
        /// Ground-truth graph JSON.
        gt: PathBuf,
        /// Output report JSON.
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Generate labeled path samples for classifier training.
    GenSamples {
        /// Input tubularity map (binary PGM).
        tubularity: PathBuf,
        /// Ground-truth mask (binary PGM, thresholded at 0.5).
        gt: PathBuf,
        /// Output directory for manifest.jsonl and patches/.
        outdir: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Generate a synthetic network: graph.json, mask.pgm, tubularity.pgm.
    Synth {
        /// Output directory.
        outdir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 512)]
        extent: usize,
        #[arg(long, default_value_t = 12)]
        n_seeds: usize,
        #[arg(long, default_value_t = 0.0)]
        loop_prob: f64,
        #[arg(long, default_value_t = 5)]
        width: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("delin: failed to set thread pool: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("delin: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

struct CmdError {
    code: u8,
    message: String,
}

impl CmdError {
    fn input(message: impl ToString) -> Self {
        Self { code: EXIT_INPUT, message: message.to_string() }
    }

    fn config(message: impl ToString) -> Self {
        Self { code: EXIT_CONFIG, message: message.to_string() }
    }
}

impl From<ScoreError> for CmdError {
    fn from(e: ScoreError) -> Self {
        let code = match e {
            ScoreError::Spawn { .. } | ScoreError::Protocol(_) | ScoreError::Timeout(_) => EXIT_SCORER,
            _ => EXIT_INPUT,
        };
        Self { code, message: e.to_string() }
    }
}

fn load_config(args: &ConfigArgs) -> Result<Config, CmdError> {
    Config::resolve(args).map_err(CmdError::config)
}

fn run(command: Command) -> Result<(), CmdError> {
    match command {
        Command::Extract { tubularity, output, cfg } => {
            let cfg = load_config(&cfg)?;
            let grid = ScalarGrid::load_pgm(&tubularity)
                .map_err(|e| CmdError::input(format!("{}: {e}", tubularity.display())))?;
            let graph = build_overcomplete_graph(&grid, &cfg.extract)
                .map_err(CmdError::input)?;
            graph
                .save_json(&output)
                .map_err(|e| CmdError::input(format!("{}: {e}", output.display())))?;
            Ok(())
        }
        Command::Score { graph, tubularity, output, cfg } => {
            let cfg = load_config(&cfg)?;
            let g = DelinGraph::load_json(&graph)
                .map_err(|e| CmdError::input(format!("{}: {e}", graph.display())))?;
            let grid = ScalarGrid::load_pgm(&tubularity)
                .map_err(|e| CmdError::input(format!("{}: {e}", tubularity.display())))?;
            let scored = score_graph(&grid, &g, &cfg.scorer, cfg.patch_size)?;
            let pruned = prune(&scored, cfg.tau)?;
            pruned
                .save_json(&output)
                .map_err(|e| CmdError::input(format!("{}: {e}", output.display())))?;
            Ok(())
        }
        Command::Evaluate { pred, gt, output, cfg } => {
            let cfg = load_config(&cfg)?;
            let pred_g = DelinGraph::load_json(&pred)
                .map_err(|e| CmdError::input(format!("{}: {e}", pred.display())))?;
            let gt_g = DelinGraph::load_json(&gt)
                .map_err(|e| CmdError::input(format!("{}: {e}", gt.display())))?;
            let report = evaluate(&gt_g, &pred_g, cfg.radius, &cfg.m_values, cfg.match_target)
                .map_err(CmdError::input)?;
            let file = std::fs::File::create(&output)
                .map_err(|e| CmdError::input(format!("{}: {e}", output.display())))?;
            let mut w = std::io::BufWriter::new(file);
            report.write_json(&mut w).map_err(CmdError::input)?;
            Ok(())
        }
        Command::GenSamples { tubularity, gt, outdir, cfg } => {
            let cfg = load_config(&cfg)?;
            let grid = ScalarGrid::load_pgm(&tubularity)
                .map_err(|e| CmdError::input(format!("{}: {e}", tubularity.display())))?;
            let gt_grid = ScalarGrid::load_pgm(&gt)
                .map_err(|e| CmdError::input(format!("{}: {e}", gt.display())))?;
            let gt_mask = gt_grid.threshold(0.5);
            let params = SampleParams {
                extract: cfg.extract,
                rho: cfg.rho,
                patch_size: cfg.patch_size,
            };
            let samples = generate_samples(&grid, &gt_mask, &params, &outdir)
                .map_err(CmdError::input)?;
            save_manifest(&samples, &outdir.join("manifest.jsonl")).map_err(CmdError::input)?;
            Ok(())
        }
        Command::Synth { outdir, seed, extent, n_seeds, loop_prob, width, sigma, noise } => {
            let params = SynthParams {
                seed,
                extent,
                n_seeds,
                loop_prob,
                width,
                sigma,
                noise_amp: noise,
            };
            params.validate().map_err(CmdError::config)?;
            std::fs::create_dir_all(&outdir)
                .map_err(|e| CmdError::input(format!("{}: {e}", outdir.display())))?;
            let graph = gen_network(&params);
            let mask = render_mask(&graph, params.width, params.extent);
            let tub = render_tubularity(&mask, params.sigma, params.noise_amp, params.seed);
            graph
                .save_json(outdir.join("graph.json"))
                .map_err(CmdError::input)?;
            let mask_grid = mask_to_grid(&mask);
            mask_grid
                .save_pgm(outdir.join("mask.pgm"), 255)
                .map_err(CmdError::input)?;
            tub.save_pgm(outdir.join("tubularity.pgm"), 65535)
                .map_err(CmdError::input)?;
            Ok(())
        }
    }
}

fn mask_to_grid(mask: &delin_core::BinaryMask) -> ScalarGrid {
    let values = (0..mask.width() * mask.height())
        .map(|i| if mask.get(i % mask.width(), i / mask.width()) { 1.0 } else { 0.0 })
        .collect();
    ScalarGrid::new(mask.width(), mask.height(), values).expect("mask grid")
}
