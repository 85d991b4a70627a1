//! Implementations of the CLI subcommands. All file formats are dispatched
//! on extension: `.ply` uses the extended-PLY form, anything else the binary
//! container.

use std::path::{Path, PathBuf};

use urbanseg_core::mesh::sample_mesh;
use urbanseg_core::model::AnnotatedPointCloud;
use urbanseg_core::partition::Block;
use urbanseg_core::stats::{correlation_matrix, summarize, SceneSummary};
use urbanseg_core::synth::{generate_scene, SynthSpec};

use crate::config::PipelineConfig;
use crate::container;
use crate::driver::{self, EvalScope, ScenePipeline};
use crate::error::CliError;
use crate::ply;
use crate::provider::build_provider;
use crate::report;

fn is_ply(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ply"))
}

pub fn read_cloud_any(path: &Path) -> Result<AnnotatedPointCloud, CliError> {
    if !path.exists() {
        return Err(CliError::Io(format!("{}: no such file", path.display())));
    }
    let result = if is_ply(path) {
        ply::read_cloud_ply_file(path)
    } else {
        container::read_cloud_file(path)
    };
    result.map_err(|e| CliError::file(path, e))
}

pub fn write_cloud_any(path: &Path, cloud: &AnnotatedPointCloud) -> Result<(), CliError> {
    let result = if is_ply(path) {
        ply::write_cloud_ply_file(path, cloud)
    } else {
        container::write_cloud_file(path, cloud)
    };
    result.map_err(|e| CliError::file(path, e))
}

pub struct SampleArgs {
    pub mesh: PathBuf,
    pub density: f64,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn cmd_sample(args: &SampleArgs) -> Result<(), CliError> {
    if !args.density.is_finite() || args.density <= 0.0 {
        return Err(CliError::Validation("density must be positive".to_string()));
    }
    if !args.mesh.exists() {
        return Err(CliError::Io(format!("{}: no such file", args.mesh.display())));
    }
    let mesh = ply::read_mesh_ply_file(&args.mesh).map_err(|e| CliError::file(&args.mesh, e))?;
    let cloud = sample_mesh(&mesh, args.density, args.seed)?;
    write_cloud_any(&args.out, &cloud)?;
    println!(
        "sampled {} points from {} triangles ({:.1} m^2) to {}",
        cloud.len(),
        mesh.triangle_count(),
        mesh.total_area(),
        args.out.display()
    );
    Ok(())
}

pub struct SegmentArgs {
    pub cloud: PathBuf,
    pub out: PathBuf,
    pub json_out: Option<PathBuf>,
    pub timing_out: Option<PathBuf>,
    pub export_ply: Option<PathBuf>,
    pub dump_features: Option<PathBuf>,
    pub blocks_out: Option<PathBuf>,
}

pub fn cmd_segment(args: &SegmentArgs, config: &PipelineConfig) -> Result<(), CliError> {
    config.validate()?;
    let cloud = read_cloud_any(&args.cloud)?;
    let provider = build_provider(&config.provider_spec()?, config)?;
    let scorer = driver::build_scorer(config.scorer);
    let pipeline: ScenePipeline = driver::pipeline_from_config(config, provider.as_ref(), scorer.as_ref())?;

    let scene = pipeline
        .run(&cloud)
        .map_err(|e| match e {
            CliError::Validation(msg) => {
                CliError::Validation(format!("{}: {msg}", args.cloud.display()))
            }
            other => other,
        })?;
    let result = scene.to_result_file(cloud.len());

    container::write_result_file(&args.out, &result).map_err(|e| CliError::file(&args.out, e))?;
    if let Some(path) = &args.json_out {
        report::write_json(path, &result)?;
    }
    if let Some(path) = &args.timing_out {
        report::write_json(path, &scene.timing)?;
    }
    if let Some(path) = &args.export_ply {
        let mut w = std::io::BufWriter::new(
            std::fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        );
        ply::write_instance_colored_ply(&mut w, &cloud, &result.assignment)
            .map_err(|e| CliError::file(path, e))?;
    }
    if let Some(path) = &args.dump_features {
        let covering = Block::covering(&cloud);
        let features = provider.provide(&cloud, &covering)?;
        container::write_features_file(path, &features).map_err(|e| CliError::file(path, e))?;
    }
    if let Some(path) = &args.blocks_out {
        let blocks: Vec<Block> = scene.outcomes.iter().map(|o| o.block.clone()).collect();
        let mut w = std::io::BufWriter::new(
            std::fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        );
        container::write_blocks(&mut w, &blocks).map_err(|e| CliError::file(path, e))?;
    }

    println!(
        "segmented {} points into {} proposals across {} blocks -> {}",
        cloud.len(),
        result.proposals.len(),
        scene.outcomes.len(),
        args.out.display()
    );
    print!("{}", report::render_timing(&scene.timing));
    Ok(())
}

pub struct EvaluateArgs {
    pub result: PathBuf,
    pub ground_truth: PathBuf,
    pub scope: EvalScope,
    pub json_out: Option<PathBuf>,
}

pub fn cmd_evaluate(args: &EvaluateArgs, config: &PipelineConfig) -> Result<(), CliError> {
    let range = config.parse_ap_range()?;
    if !args.result.exists() {
        return Err(CliError::Io(format!("{}: no such file", args.result.display())));
    }
    let result =
        container::read_result_file(&args.result).map_err(|e| CliError::file(&args.result, e))?;
    let gt = read_cloud_any(&args.ground_truth)?;
    let report = driver::evaluate_result(&result, &gt, range, args.scope)?;
    if let Some(path) = &args.json_out {
        report::write_json(path, &report)?;
    }
    let name = args
        .result
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scene".to_string());
    print!("{}", report::render_eval_table(&name, &report));
    Ok(())
}

pub struct StatsArgs {
    pub inputs: Vec<PathBuf>,
    pub json_out: Option<PathBuf>,
    pub csv_out: Option<PathBuf>,
    pub correlation_csv: Option<PathBuf>,
}

#[derive(serde::Serialize)]
struct StatsOutput {
    summaries: Vec<SceneSummary>,
    correlation: Vec<Vec<f64>>,
}

pub fn cmd_stats(args: &StatsArgs) -> Result<(), CliError> {
    if args.inputs.is_empty() {
        return Err(CliError::Validation("stats needs at least one input".to_string()));
    }
    let mut summaries = Vec::with_capacity(args.inputs.len());
    for path in &args.inputs {
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let summary: SceneSummary = serde_json::from_str(&text)
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            summaries.push(summary);
        } else {
            let cloud = read_cloud_any(path)?;
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "scene".to_string());
            summaries.push(summarize(&cloud, &name));
        }
    }

    let correlation = correlation_matrix(&summaries).map_err(|e| {
        CliError::Validation(format!(
            "correlation undefined: {e}; every scene needs building-category variance"
        ))
    })?;

    print!("{}", report::render_point_table(&summaries));
    println!();
    print!("{}", report::render_building_table(&summaries));
    println!();
    print!("{}", report::render_long_tails(&summaries));
    println!();
    print!("{}", report::render_correlation_table(&summaries, &correlation));

    if let Some(path) = &args.json_out {
        report::write_json(
            path,
            &StatsOutput {
                summaries: summaries.clone(),
                correlation: correlation.clone(),
            },
        )?;
    }
    if let Some(path) = &args.csv_out {
        report::write_summaries_csv(path, &summaries)?;
    }
    if let Some(path) = &args.correlation_csv {
        report::write_correlation_csv(path, &summaries, &correlation)?;
    }
    Ok(())
}

pub struct SynthArgs {
    pub buildings: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub ground_density: f64,
    pub vegetation_blobs: usize,
    pub vehicles: usize,
    pub height_min: f64,
    pub height_max: f64,
}

pub fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let spec = SynthSpec {
        buildings: args.buildings,
        ground_density: args.ground_density,
        vegetation_blobs: args.vegetation_blobs,
        vehicles: args.vehicles,
        height: (args.height_min, args.height_max),
        ..SynthSpec::default()
    };
    let cloud = generate_scene(&spec, args.seed)?;
    write_cloud_any(&args.out, &cloud)?;
    println!(
        "generated {} ({} points, {} instances) -> {}",
        urbanseg_core::synth::describe(&spec),
        cloud.len(),
        cloud.instance_ids().len(),
        args.out.display()
    );
    Ok(())
}
