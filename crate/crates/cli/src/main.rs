mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use outpano_core::foveation::{profile_csv, resolution_profile_with_downscale};
use outpano_core::fusion::{align_mid, align_near, fuse, overlay, seam_discontinuity};
use outpano_core::metrics::{evaluate, Aggregate};
use outpano_core::pipeline::{run_batch, run_to_dir, BatchItem};
use outpano_core::projection::{mirror_extend, prepare_dataset, read_manifest};
use outpano_core::{
    Coverage, EquirectPanorama, FoveatedLayout, FoveationModel, FusionConfig, FusionMethod, GeneratorStage, RasterImage,
};
use serde_json::json;

use config::{ConfigArgs, Method};

#[derive(Parser)]
#[command(name = "outpano", version, about = "Foveated panoramic outpainting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Stage {
    Near,
    Mid,
}

impl From<Stage> for GeneratorStage {
    fn from(s: Stage) -> Self {
        match s {
            Stage::Near => GeneratorStage::Near,
            Stage::Mid => GeneratorStage::Mid,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Expand one narrow image into a 180° panorama.
    Run {
        #[arg(long)]
        input: PathBuf,
        /// Output directory for pano180.png, pano360.png and manifest.json.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run every image in a directory (or a JSON item list) into `out/<id>/`.
    RunBatch {
        /// Directory of PNG/JPEG inputs; ids are file stems.
        #[arg(long, conflicts_with = "list", required_unless_present = "list")]
        inputs: Option<PathBuf>,
        /// JSON array of `{"id", "input", "ground_truth"}` items.
        #[arg(long)]
        list: Option<PathBuf>,
        /// 180° ground-truth panoramas matched to inputs by file stem.
        #[arg(long)]
        gt_dir: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Cut training/evaluation pairs out of full-sphere panoramas.
    PrepareDataset {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Side of the views extracted before resizing to 256.
        #[arg(long, default_value_t = 512)]
        native_size: usize,
    },
    /// Align a generated image with its source and blend them.
    Fuse {
        /// Narrow input (near stage) or fused near image (mid stage).
        #[arg(long)]
        original: PathBuf,
        #[arg(long)]
        generated: PathBuf,
        #[arg(long, value_enum)]
        stage: Stage,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "poisson")]
        method: Method,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        max_iters: Option<usize>,
        /// Height of the 180° canvas for the mid stage.
        #[arg(long, default_value_t = 512)]
        height: usize,
        #[command(flatten)]
        layout: LayoutArgs,
    },
    /// Score predictions against a prepared dataset.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Defaults to `<gt>/manifest.jsonl`.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value = "report.csv")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "near")]
        stage: Stage,
    },
    /// Foveation model utilities.
    Foveation {
        #[command(subcommand)]
        command: FoveationCommand,
    },
    /// Mirror a 180° panorama out to 360°.
    Extend360 {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum FoveationCommand {
    /// Required vs. delivered resolution as CSV.
    Profile {
        #[arg(long, default_value_t = 2.5)]
        beta: f64,
        #[arg(long, default_value_t = 1.0)]
        r1: f64,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        #[arg(long, default_value_t = 4.0)]
        mid_downscale: f64,
        #[command(flatten)]
        layout: LayoutArgs,
        /// Write here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args, Debug)]
struct LayoutArgs {
    #[arg(long)]
    center_fov: Option<f64>,
    #[arg(long)]
    near_fov: Option<f64>,
    #[arg(long)]
    mid_fov: Option<f64>,
}

impl LayoutArgs {
    fn layout(&self) -> Result<FoveatedLayout, String> {
        let d = FoveatedLayout::default();
        FoveatedLayout::new(
            self.center_fov.unwrap_or(d.center_fov),
            self.near_fov.unwrap_or(d.near_fov),
            self.mid_fov.unwrap_or(d.mid_fov),
        )
        .map_err(|e| e.to_string())
    }
}

type CliResult = Result<(), String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("JSON values serialize"));
}

fn is_image(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "jpg" | "jpeg")
    )
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn images_in(dir: &Path) -> Result<Vec<PathBuf>, String> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image(p))
        .collect();
    files.sort();
    Ok(files)
}

fn cmd_run(input: &Path, out: &Path, config: &ConfigArgs) -> CliResult {
    let config = config.resolve()?;
    let manifest = run_to_dir(&config, input, out).map_err(err)?;
    print_json(&json!({
        "artifacts": manifest.artifacts,
        "seams": manifest.seams,
        "timings_ms": manifest.timings_ms,
    }));
    Ok(())
}

fn batch_items(inputs: Option<&Path>, list: Option<&Path>, gt_dir: Option<&Path>) -> Result<Vec<BatchItem>, String> {
    let mut items: Vec<BatchItem> = match (inputs, list) {
        (_, Some(list)) => {
            let text = fs::read_to_string(list).map_err(|e| format!("{}: {e}", list.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", list.display()))?
        }
        (Some(dir), None) => {
            images_in(dir)?.into_iter().map(|p| BatchItem { id: stem(&p), input: p, ground_truth: None }).collect()
        }
        (None, None) => return Err("either --inputs or --list is required".into()),
    };
    if let Some(gt_dir) = gt_dir {
        let gts = images_in(gt_dir)?;
        for item in &mut items {
            let key = stem(&item.input);
            if let Some(gt) = gts.iter().find(|g| stem(g) == key) {
                item.ground_truth = Some(gt.clone());
            }
        }
    }
    Ok(items)
}

fn cmd_run_batch(inputs: Option<&Path>, list: Option<&Path>, gt_dir: Option<&Path>, out: &Path, config: &ConfigArgs) -> CliResult {
    let config = config.resolve()?;
    let items = batch_items(inputs, list, gt_dir)?;
    let report = run_batch(&config, &items, out).map_err(err)?;
    let failures: Vec<_> = report.items.iter().filter_map(|i| i.error.as_ref().map(|e| json!({"id": i.id, "error": e}))).collect();
    print_json(&json!({
        "succeeded": report.succeeded,
        "failed": report.failed,
        "failures": failures,
        "metrics": report.metrics.as_ref().map(|m| json!({"overall": m.overall})),
        "report": out.join("batch.json"),
    }));
    Ok(())
}

fn cmd_prepare(input: &Path, out: &Path, native_size: usize) -> CliResult {
    fs::create_dir_all(out).map_err(err)?;
    let summary = prepare_dataset(input, out, native_size).map_err(err)?;
    print_json(&json!({
        "pairs": summary.records.len(),
        "manifest": summary.manifest,
        "failures": summary.failures,
    }));
    if summary.records.is_empty() {
        return Err("no panorama could be processed".into());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_fuse(
    original: &Path,
    generated: &Path,
    stage: Stage,
    out: &Path,
    method: Method,
    tol: f64,
    max_iters: Option<usize>,
    height: usize,
    layout: &LayoutArgs,
) -> CliResult {
    let layout = layout.layout()?;
    let original = RasterImage::load(original).map_err(err)?;
    let generated = RasterImage::load(generated).map_err(err)?;
    let composite = match stage {
        Stage::Near => align_near(&original, &generated, &layout),
        Stage::Mid => align_mid(&original, &generated, &layout, height),
    }
    .map_err(err)?;
    let config = FusionConfig {
        method: match method {
            Method::Overlay => FusionMethod::Overlay,
            Method::Poisson => FusionMethod::Poisson,
        },
        cg_tolerance: tol,
        cg_max_iters: max_iters,
        ..Default::default()
    };
    config.validate().map_err(err)?;
    let fused = fuse(&composite, &config).map_err(err)?;
    let before = seam_discontinuity(&overlay(&composite), &composite.mask).map_err(err)?;
    let after = seam_discontinuity(&fused, &composite.mask).map_err(err)?;
    fused.save(out).map_err(err)?;
    print_json(&json!({
        "stage": GeneratorStage::from(stage).name(),
        "method": method.name(),
        "seam_before": before,
        "seam_after": after,
        "output": out,
    }));
    Ok(())
}

fn cmd_evaluate(pred: &Path, gt: &Path, manifest: Option<&Path>, out: &Path, stage: Stage) -> CliResult {
    let manifest_path = manifest.map(Path::to_path_buf).unwrap_or_else(|| gt.join("manifest.jsonl"));
    let records = read_manifest(&manifest_path).map_err(|e| format!("{}: {e}", manifest_path.display()))?;
    let report = evaluate(pred, gt, &records, stage.into()).map_err(err)?;
    fs::write(out, report.to_csv()).map_err(|e| format!("{}: {e}", out.display()))?;
    let per_direction: serde_json::Map<String, serde_json::Value> =
        report.per_direction.iter().map(|(k, v): (&String, &Aggregate)| (k.clone(), json!(v))).collect();
    print_json(&json!({
        "stage": GeneratorStage::from(stage).name(),
        "overall": report.overall,
        "per_direction": per_direction,
        "missing": report.missing,
        "failed": report.failed,
        "report": out,
    }));
    Ok(())
}

fn cmd_profile(beta: f64, r1: f64, step: f64, mid_downscale: f64, layout: &LayoutArgs, out: Option<&Path>) -> CliResult {
    let model = FoveationModel::new(beta).map_err(err)?;
    let rows = resolution_profile_with_downscale(&model, &layout.layout()?, r1, step, mid_downscale).map_err(err)?;
    let csv = profile_csv(&rows);
    match out {
        Some(path) => fs::write(path, csv).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn cmd_extend(input: &Path, out: &Path) -> CliResult {
    let pano = EquirectPanorama::new(RasterImage::load(input).map_err(err)?, Coverage::Hemisphere).map_err(err)?;
    let full = mirror_extend(&pano).map_err(err)?;
    full.image().save(out).map_err(err)?;
    print_json(&json!({ "output": out, "width": full.width(), "height": full.height() }));
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Command::Run { input, out, config } => cmd_run(&input, &out, &config),
        Command::RunBatch { inputs, list, gt_dir, out, config } => {
            cmd_run_batch(inputs.as_deref(), list.as_deref(), gt_dir.as_deref(), &out, &config)
        }
        Command::PrepareDataset { input, out, native_size } => cmd_prepare(&input, &out, native_size),
        Command::Fuse { original, generated, stage, out, method, tol, max_iters, height, layout } => {
            cmd_fuse(&original, &generated, stage, &out, method, tol, max_iters, height, &layout)
        }
        Command::Evaluate { pred, gt, manifest, out, stage } => cmd_evaluate(&pred, &gt, manifest.as_deref(), &out, stage),
        Command::Foveation { command: FoveationCommand::Profile { beta, r1, step, mid_downscale, layout, out } } => {
            cmd_profile(beta, r1, step, mid_downscale, &layout, out.as_deref())
        }
        Command::Extend360 { input, out } => cmd_extend(&input, &out),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
