//! End-to-end orchestration: narrow input → near generation → fusion in the
//! perspective domain → mid generation → fusion in the equirectangular domain
//! → optional mirror extension.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::foveation::FoveatedLayout;
use crate::fusion::{self, Composite, FusionConfig, FusionMethod};
use crate::generator::{preprocess_input, Generator, GeneratorSpec, GeneratorStage};
use crate::metrics::{self, MetricReport, MetricRow};
use crate::projection::{mirror_extend, Coverage, EquirectPanorama};
use crate::raster::RasterImage;

pub const MIN_INPUT_SIZE: usize = 64;
pub const MIN_OUTPUT_HEIGHT: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub near_generator: GeneratorSpec,
    pub mid_generator: GeneratorSpec,
    pub fusion: FusionConfig,
    pub layout: FoveatedLayout,
    /// Height of the 180° equirectangular output (its width is the same).
    pub output_height: usize,
    pub extend_to_360: bool,
    /// The mid-periphery content is brought to `output_height / mid_downscale`
    /// before being upsampled into the canvas.
    pub mid_downscale: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            near_generator: GeneratorSpec::default(),
            mid_generator: GeneratorSpec::default(),
            fusion: FusionConfig::default(),
            layout: FoveatedLayout::default(),
            output_height: 512,
            extend_to_360: false,
            mid_downscale: 4,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.output_height < MIN_OUTPUT_HEIGHT {
            return Err(Error::Domain(format!("output_height must be at least {MIN_OUTPUT_HEIGHT}, got {}", self.output_height)));
        }
        if !matches!(self.mid_downscale, 1 | 2 | 4) {
            return Err(Error::Domain(format!("mid_downscale must be 1, 2 or 4, got {}", self.mid_downscale)));
        }
        if self.extend_to_360 && self.output_height % 2 != 0 {
            return Err(Error::Domain("extend_to_360 needs an even output_height".into()));
        }
        self.layout.validate()?;
        self.fusion.validate()?;
        self.near_generator.validate()?;
        self.mid_generator.validate()
    }

    /// Side of the near-periphery canvas whose central pixel density matches
    /// the equirectangular output.
    pub fn near_canvas_width(&self) -> usize {
        let half = (self.layout.near_fov / 2.0).to_radians();
        let w = 2.0 * half.tan() * self.output_height as f64 / std::f64::consts::PI;
        (w.round() as usize).max(2)
    }
}

/// Seam discontinuity at one fusion step, for the plain overlay and for the
/// configured fusion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeamRecord {
    pub stage: GeneratorStage,
    pub overlay: f64,
    pub fused: f64,
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub pano_180: EquirectPanorama,
    pub pano_360: Option<EquirectPanorama>,
    /// The input as placed in the near canvas (possibly downscaled).
    pub working_input: RasterImage,
    pub near_generated: RasterImage,
    pub near_fused: RasterImage,
    pub mid_generated: RasterImage,
    pub seams: Vec<SeamRecord>,
    pub timings_ms: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub input: Option<PathBuf>,
    pub config: PipelineConfig,
    /// Artifact name → file written.
    pub artifacts: BTreeMap<String, PathBuf>,
    pub timings_ms: BTreeMap<String, f64>,
    pub seams: Vec<SeamRecord>,
}

/// Runs with the generators named in `config`.
pub fn run(config: &PipelineConfig, input: &RasterImage) -> Result<PipelineOutput> {
    run_with(config, input, &config.near_generator, &config.mid_generator)
}

/// Runs with caller-supplied generators; `config`'s generator specs are
/// ignored apart from validation.
pub fn run_with(config: &PipelineConfig, input: &RasterImage, near: &dyn Generator, mid: &dyn Generator) -> Result<PipelineOutput> {
    config.validate()?;
    input.validate()?;
    if input.width() < MIN_INPUT_SIZE || input.height() < MIN_INPUT_SIZE {
        return Err(Error::Input(format!(
            "input is {}x{}, needs at least {MIN_INPUT_SIZE}x{MIN_INPUT_SIZE}",
            input.width(),
            input.height()
        )));
    }
    let mut timings = BTreeMap::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timings: &mut BTreeMap<String, f64>| {
        timings.insert(name.to_string(), clock.elapsed().as_secs_f64() * 1e3);
        clock = Instant::now();
    };

    let working = working_input(config, input);
    let ratio = config.layout.near_linear_ratio();
    let canvas_w = (working.width() as f64 / ratio).round() as usize;
    let canvas_h = (working.height() as f64 / ratio).round() as usize;

    let stage = GeneratorStage::Near;
    let near_generated = near
        .generate(&preprocess_input(&working, stage), stage, config.seed)
        .and_then(|g| check_generated(g, stage))
        .map_err(|e| e.in_stage(stage))?;
    lap("near_generate", &mut timings);
    let near_comp = fusion::align_near_on(&working, &near_generated, canvas_w, canvas_h).map_err(|e| e.in_stage(stage))?;
    let (near_fused, near_seam) = fuse_with_seams(&near_comp, &config.fusion, stage)?;
    lap("near_fuse", &mut timings);

    let stage = GeneratorStage::Mid;
    let mid_generated = mid
        .generate(&preprocess_input(&near_fused, stage), stage, config.seed.wrapping_add(1))
        .and_then(|g| check_generated(g, stage))
        .map_err(|e| e.in_stage(stage))?;
    lap("mid_generate", &mut timings);
    let h = config.output_height;
    let reduced = (h / config.mid_downscale).max(1);
    let mid_budget = mid_generated.resize(reduced, reduced);
    let mid_comp = fusion::align_mid(&near_fused, &mid_budget, &config.layout, h).map_err(|e| e.in_stage(stage))?;
    let (mid_fused, mid_seam) = fuse_with_seams(&mid_comp, &config.fusion, stage)?;
    lap("mid_fuse", &mut timings);

    let pano_180 = EquirectPanorama::new(mid_fused, Coverage::Hemisphere)?;
    let pano_360 = if config.extend_to_360 { Some(mirror_extend(&pano_180)?) } else { None };
    lap("extend", &mut timings);

    Ok(PipelineOutput {
        pano_180,
        pano_360,
        working_input: working,
        near_generated,
        near_fused,
        mid_generated,
        seams: vec![near_seam, mid_seam],
        timings_ms: timings,
    })
}

/// The input, downscaled when its native scale would exceed the density the
/// output can represent.
fn working_input(config: &PipelineConfig, input: &RasterImage) -> RasterImage {
    let ratio = config.layout.near_linear_ratio();
    let max_w = config.near_canvas_width() as f64 * ratio;
    let (w, h) = input.dims();
    if (w as f64) <= max_w {
        return input.clone();
    }
    let s = max_w / w as f64;
    let nw = ((w as f64 * s).round() as usize).max(2);
    let nh = ((h as f64 * s).round() as usize).max(2);
    input.resize(nw, nh)
}

fn check_generated(img: RasterImage, stage: GeneratorStage) -> Result<RasterImage> {
    let n = crate::generator::NETWORK_SIZE;
    if img.dims() != (n, n) {
        return Err(Error::Dimension(format!("{stage} generator returned {}x{}, expected {n}x{n}", img.width(), img.height())));
    }
    img.validate()?;
    Ok(img)
}

fn fuse_with_seams(comp: &Composite, config: &FusionConfig, stage: GeneratorStage) -> Result<(RasterImage, SeamRecord)> {
    let attrib = |e: Error| e.in_stage(stage);
    let fused = fusion::fuse(comp, config).map_err(attrib)?;
    let overlay = fusion::seam_discontinuity(&comp.canvas, &comp.mask).map_err(attrib)?;
    let after = match config.method {
        FusionMethod::Overlay => overlay,
        FusionMethod::Poisson => fusion::seam_discontinuity(&fused, &comp.mask).map_err(attrib)?,
    };
    Ok((fused, SeamRecord { stage, overlay, fused: after }))
}

/// Runs on the image at `input` and writes `pano180.png`, optional
/// `pano360.png`, the intermediates and `manifest.json` into `out_dir`.
pub fn run_to_dir(config: &PipelineConfig, input: &Path, out_dir: &Path) -> Result<RunManifest> {
    let image = RasterImage::load(input)?;
    let output = run(config, &image)?;
    write_outputs(config, Some(input), &output, out_dir)
}

/// Writes a finished run and its manifest into `out_dir`.
pub fn write_outputs(config: &PipelineConfig, input: Option<&Path>, output: &PipelineOutput, out_dir: &Path) -> Result<RunManifest> {
    fs::create_dir_all(out_dir)?;
    let mut artifacts = BTreeMap::new();
    let mut save = |name: &str, file: &str, img: &RasterImage| -> Result<()> {
        let path = out_dir.join(file);
        img.save(&path)?;
        artifacts.insert(name.to_string(), path);
        Ok(())
    };
    save("near_generated", "near_generated.png", &output.near_generated)?;
    save("near_fused", "near_fused.png", &output.near_fused)?;
    save("mid_generated", "mid_generated.png", &output.mid_generated)?;
    save("pano180", "pano180.png", output.pano_180.image())?;
    if let Some(p) = &output.pano_360 {
        save("pano360", "pano360.png", p.image())?;
    }
    let manifest = RunManifest {
        input: input.map(Path::to_path_buf),
        config: config.clone(),
        artifacts,
        timings_ms: output.timings_ms.clone(),
        seams: output.seams.clone(),
    };
    fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchItem {
    pub id: String,
    pub input: PathBuf,
    /// Optional 180° ground-truth panorama for scoring `pano180.png`.
    pub ground_truth: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BatchItemReport {
    pub id: String,
    pub output_dir: PathBuf,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BatchReport {
    pub items: Vec<BatchItemReport>,
    pub succeeded: usize,
    pub failed: usize,
    pub metrics: Option<MetricReport>,
}

/// Runs every item into `out_dir/<id>/`, isolating failures. Fails only when
/// the list is empty or every item failed.
pub fn run_batch(config: &PipelineConfig, items: &[BatchItem], out_dir: &Path) -> Result<BatchReport> {
    if items.is_empty() {
        return Err(Error::Input("batch is empty".into()));
    }
    config.validate()?;
    let results: Vec<(BatchItemReport, Option<MetricRow>)> = items
        .par_iter()
        .map(|item| {
            let dir = out_dir.join(&item.id);
            let outcome = (|| {
                run_to_dir(config, &item.input, &dir)?;
                match &item.ground_truth {
                    Some(gt) => score(&dir.join("pano180.png"), gt, &item.id).map(Some),
                    None => Ok(None),
                }
            })();
            match outcome {
                Ok(row) => (BatchItemReport { id: item.id.clone(), output_dir: dir, error: None }, row),
                Err(e) => (BatchItemReport { id: item.id.clone(), output_dir: dir, error: Some(e.to_string()) }, None),
            }
        })
        .collect();

    let failed = results.iter().filter(|(r, _)| r.error.is_some()).count();
    if failed == items.len() {
        return Err(Error::Batch(failed));
    }
    let any_gt = items.iter().any(|i| i.ground_truth.is_some());
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (report, row) in results {
        rows.extend(row);
        reports.push(report);
    }
    let metrics = any_gt.then(|| MetricReport::from_rows(rows, Vec::new(), Vec::new()));
    let report = BatchReport { succeeded: items.len() - failed, failed, items: reports, metrics };
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("batch.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

fn score(pred: &Path, gt: &Path, id: &str) -> Result<MetricRow> {
    let p = RasterImage::load(pred)?;
    let g = RasterImage::load(gt)?.resize(p.width(), p.height());
    Ok(MetricRow { id: id.to_string(), direction: "front".into(), psnr: metrics::psnr(&p, &g)?, nrmse: metrics::nrmse(&p, &g)? })
}
