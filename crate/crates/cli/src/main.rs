//! Command-line front end: sample / segment / evaluate / stats / synth.
//!
//! Exit codes: 0 success, 1 validation, 2 I/O, 3 internal.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use urbanseg::commands::{
    cmd_evaluate, cmd_sample, cmd_segment, cmd_stats, cmd_synth, EvaluateArgs, SampleArgs,
    SegmentArgs, StatsArgs, SynthArgs,
};
use urbanseg::config::{PipelineConfig, CONFIG_ENV};
use urbanseg::driver::EvalScope;
use urbanseg::CliError;

#[derive(Parser)]
#[command(
    name = "urbanseg",
    about = "Clustering-free building instance segmentation for urban point clouds",
    version
)]
struct Cli {
    /// Config file; flags override its values.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Sample an annotated point cloud from a labeled triangle mesh.
    Sample(SampleCli),
    /// Segment building instances in an annotated cloud.
    Segment(SegmentCli),
    /// Evaluate a segmentation result against ground truth.
    Evaluate(EvaluateCli),
    /// Scene statistics: class counts, histograms, long tails, correlations.
    Stats(StatsCli),
    /// Generate a synthetic annotated test scene.
    Synth(SynthCli),
}

#[derive(Args)]
struct SampleCli {
    /// Labeled mesh (.ply with per-face semantic/instance/category).
    #[arg(long)]
    mesh: PathBuf,
    /// Surface density, points per square meter [default: 80].
    #[arg(long)]
    density: Option<f64>,
    /// RNG seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Output cloud (.ply or binary container).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SegmentCli {
    /// Input annotated cloud (.ply or binary container).
    #[arg(long)]
    cloud: PathBuf,
    /// Feature provider: `oracle` or `file:PATH` [default: oracle].
    #[arg(long)]
    features: Option<String>,
    /// Oracle embedding noise sigma [default: 0].
    #[arg(long)]
    noise_embedding: Option<f64>,
    /// Oracle offset noise sigma [default: 0].
    #[arg(long)]
    noise_offset: Option<f64>,
    /// Oracle semantic flip probability [default: 0].
    #[arg(long)]
    noise_semantic: Option<f64>,
    /// RNG seed for noise and cropping [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// One candidate per this many foreground points [default: 3000].
    #[arg(long)]
    k_ratio: Option<usize>,
    /// Candidate cap per block [default: 100].
    #[arg(long)]
    k_max: Option<usize>,
    /// Anchor merge radius in meters [default: 1.0].
    #[arg(long)]
    merge_radius: Option<f64>,
    /// Drop proposals scoring below this [default: 0.1].
    #[arg(long)]
    score_threshold: Option<f64>,
    /// Oracle embedding dimension [default: 16].
    #[arg(long)]
    embedding_dim: Option<usize>,
    /// Block cap in points [default: 500000].
    #[arg(long)]
    max_points: Option<usize>,
    /// Voxel edge in meters for --voxel-downsample [default: 1/3].
    #[arg(long)]
    voxel_edge: Option<f64>,
    /// Segment one representative point per voxel, then broadcast labels.
    #[arg(long)]
    voxel_downsample: bool,
    /// Proposal scorer: coverage or ground-truth [default: coverage].
    #[arg(long)]
    scorer: Option<String>,
    /// FPS start rule: min-coord or seeded [default: min-coord].
    #[arg(long)]
    fps_start: Option<String>,
    /// Worker threads; 0 = available parallelism [default: 0].
    #[arg(long)]
    threads: Option<usize>,
    /// Output result container.
    #[arg(long)]
    out: PathBuf,
    /// Also write the result as JSON.
    #[arg(long)]
    json_out: Option<PathBuf>,
    /// Write per-block stage timings as JSON.
    #[arg(long)]
    timing_out: Option<PathBuf>,
    /// Export a PLY colorized by proposal id.
    #[arg(long)]
    export_ply: Option<PathBuf>,
    /// Dump the provider's whole-scene features to a feature file.
    #[arg(long)]
    dump_features: Option<PathBuf>,
    /// Write the block decomposition for caching.
    #[arg(long)]
    blocks_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateCli {
    /// Segmentation result container.
    #[arg(long)]
    result: PathBuf,
    /// Ground-truth annotated cloud.
    #[arg(long)]
    ground_truth: PathBuf,
    /// AP threshold range: 25-95 or 50-95 [default: 25-95].
    #[arg(long)]
    ap_range: Option<String>,
    /// Ground-truth scope: scene, or block (split instances at block
    /// boundaries) [default: scene].
    #[arg(long)]
    scope: Option<String>,
    /// Write the evaluation report as JSON.
    #[arg(long)]
    json_out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsCli {
    /// Clouds (.ply / container) or precomputed summary JSON files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    json_out: Option<PathBuf>,
    #[arg(long)]
    csv_out: Option<PathBuf>,
    #[arg(long)]
    correlation_csv: Option<PathBuf>,
}

#[derive(Args)]
struct SynthCli {
    /// Number of buildings [default: 20].
    #[arg(long)]
    buildings: Option<usize>,
    /// RNG seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Output cloud (.ply or binary container).
    #[arg(long)]
    out: PathBuf,
    /// Ground points per square meter [default: 1.0].
    #[arg(long)]
    ground_density: Option<f64>,
    /// Vegetation blob count [default: 8].
    #[arg(long)]
    vegetation_blobs: Option<usize>,
    /// Vehicle count [default: 10].
    #[arg(long)]
    vehicles: Option<usize>,
    /// Minimum building height in meters [default: 4].
    #[arg(long)]
    height_min: Option<f64>,
    /// Maximum building height in meters [default: 24].
    #[arg(long)]
    height_max: Option<f64>,
}

fn merge_segment_config(cli: &SegmentCli, config: &mut PipelineConfig) {
    if let Some(v) = &cli.features {
        config.features = v.clone();
    }
    if let Some(v) = cli.noise_embedding {
        config.noise_embedding = v;
    }
    if let Some(v) = cli.noise_offset {
        config.noise_offset = v;
    }
    if let Some(v) = cli.noise_semantic {
        config.noise_semantic = v;
    }
    if let Some(v) = cli.seed {
        config.seed = v;
    }
    if let Some(v) = cli.k_ratio {
        config.k_ratio = v;
    }
    if let Some(v) = cli.k_max {
        config.k_max = v;
    }
    if let Some(v) = cli.merge_radius {
        config.merge_radius = v;
    }
    if let Some(v) = cli.score_threshold {
        config.score_threshold = v;
    }
    if let Some(v) = cli.embedding_dim {
        config.embedding_dim = v;
    }
    if let Some(v) = cli.max_points {
        config.max_points = v;
    }
    if let Some(v) = cli.voxel_edge {
        config.voxel_edge = v;
    }
    if cli.voxel_downsample {
        config.voxel_downsample = true;
    }
    if let Some(v) = cli.threads {
        config.threads = v;
    }
    if let Some(v) = &cli.fps_start {
        config.fps_start = v.clone();
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = PipelineConfig::load_default(cli.config.as_deref())?;
    match cli.command {
        Command::Sample(args) => cmd_sample(&SampleArgs {
            mesh: args.mesh,
            density: args.density.unwrap_or(config.density),
            seed: args.seed.unwrap_or(config.seed),
            out: args.out,
        }),
        Command::Segment(args) => {
            merge_segment_config(&args, &mut config);
            if let Some(scorer) = &args.scorer {
                config.scorer = match scorer.as_str() {
                    "coverage" => urbanseg::config::ScorerKind::Coverage,
                    "ground-truth" => urbanseg::config::ScorerKind::GroundTruth,
                    other => {
                        return Err(CliError::Validation(format!(
                            "unknown scorer `{other}`; use `coverage` or `ground-truth`"
                        )))
                    }
                };
            }
            cmd_segment(
                &SegmentArgs {
                    cloud: args.cloud,
                    out: args.out,
                    json_out: args.json_out,
                    timing_out: args.timing_out,
                    export_ply: args.export_ply,
                    dump_features: args.dump_features,
                    blocks_out: args.blocks_out,
                },
                &config,
            )
        }
        Command::Evaluate(args) => {
            if let Some(range) = &args.ap_range {
                config.ap_range = range.clone();
            }
            let scope = match args.scope.as_deref() {
                None | Some("scene") => EvalScope::Scene,
                Some("block") => EvalScope::Block,
                Some(other) => {
                    return Err(CliError::Validation(format!(
                        "unknown scope `{other}`; use `scene` or `block`"
                    )))
                }
            };
            cmd_evaluate(
                &EvaluateArgs {
                    result: args.result,
                    ground_truth: args.ground_truth,
                    scope,
                    json_out: args.json_out,
                },
                &config,
            )
        }
        Command::Stats(args) => cmd_stats(&StatsArgs {
            inputs: args.inputs,
            json_out: args.json_out,
            csv_out: args.csv_out,
            correlation_csv: args.correlation_csv,
        }),
        Command::Synth(args) => cmd_synth(&SynthArgs {
            buildings: args.buildings.unwrap_or(20),
            seed: args.seed.unwrap_or(config.seed),
            out: args.out,
            ground_density: args.ground_density.unwrap_or(1.0),
            vegetation_blobs: args.vegetation_blobs.unwrap_or(8),
            vehicles: args.vehicles.unwrap_or(10),
            height_min: args.height_min.unwrap_or(4.0),
            height_max: args.height_max.unwrap_or(24.0),
        }),
    }
}

fn main() -> ExitCode {
    // Die quietly when stdout is a closed pipe (e.g. `urbanseg ... | head`)
    // instead of panicking inside println.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are not failures.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
