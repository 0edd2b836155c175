mod common;

use std::fs;

use outpano_core::foveation::input_fov;
use outpano_core::metrics::psnr;
use outpano_core::pipeline::{run, run_batch, run_to_dir, BatchItem, PipelineConfig, RunManifest};
use outpano_core::projection::{extract_view, make_pairs};
use outpano_core::{Error, GeneratorSpec, RasterImage, ViewSpec};

fn quick() -> PipelineConfig {
    PipelineConfig {
        near_generator: GeneratorSpec::ResizeBaseline,
        mid_generator: GeneratorSpec::MirrorPad,
        output_height: 128,
        ..Default::default()
    }
}

fn narrow_input(variant: u64) -> RasterImage {
    make_pairs(&common::smooth_sphere(256, variant), 512).unwrap().remove(0).input_narrow
}

#[test]
fn original_is_recoverable_from_the_panorama() {
    let input = narrow_input(2);
    let cfg = PipelineConfig::default();
    let out = run(&cfg, &input).unwrap();
    let fov = input_fov(cfg.layout.near_linear_ratio(), cfg.layout.near_fov).unwrap();
    let view = ViewSpec::new(0.0, 0.0, fov, fov).unwrap();
    let back = extract_view(&out.pano_180, &view, input.width(), input.height()).unwrap();
    let v = psnr(&back, &input).unwrap();
    assert!(v >= 30.0, "input recovery {v:.2} dB");
}

#[test]
fn run_to_dir_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("input.png");
    narrow_input(3).save(&input).unwrap();
    let cfg = PipelineConfig { extend_to_360: true, ..quick() };
    let manifest = run_to_dir(&cfg, &input, &dir.path().join("out")).unwrap();
    for name in ["pano180", "pano360", "near_generated", "near_fused", "mid_generated"] {
        assert!(manifest.artifacts[name].is_file(), "{name} missing");
    }
    let pano360 = RasterImage::load(&manifest.artifacts["pano360"]).unwrap();
    assert_eq!(pano360.dims(), (256, 128));
    let text = fs::read_to_string(dir.path().join("out/manifest.json")).unwrap();
    let parsed: RunManifest = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed.config, cfg);
    assert_eq!(parsed.seams.len(), 2);
    assert!(parsed.timings_ms.contains_key("mid_fuse"));
}

#[test]
fn poisson_seams_never_exceed_overlay() {
    for variant in 0..3 {
        let input = make_pairs(&common::textured_sphere(128, variant), 256).unwrap().remove(1).input_narrow;
        let out = run(&PipelineConfig { output_height: 256, ..Default::default() }, &input).unwrap();
        for s in &out.seams {
            assert!(s.fused <= s.overlay, "{:?}", s);
        }
    }
}

#[test]
fn baseline_keeps_the_input_placement() {
    let input = narrow_input(4);
    let cfg = PipelineConfig { mid_generator: GeneratorSpec::ResizeBaseline, ..quick() };
    let out = run(&cfg, &input).unwrap();
    let wi = &out.working_input;
    let (cw, ch) = out.near_fused.dims();
    assert_eq!(out.near_fused.crop((cw - wi.width()) / 2, (ch - wi.height()) / 2, wi.width(), wi.height()).unwrap(), *wi);
    // Baseline near output is the stretched working input.
    assert_eq!(out.near_generated, wi.resize(256, 256));
}

fn write_items(dir: &std::path::Path, n: usize, corrupt: Option<usize>) -> Vec<BatchItem> {
    (0..n)
        .map(|k| {
            let path = dir.join(format!("in{k}.png"));
            if corrupt == Some(k) {
                fs::write(&path, b"not a png").unwrap();
            } else {
                narrow_input(k as u64).save(&path).unwrap();
            }
            BatchItem { id: format!("item{k}"), input: path, ground_truth: None }
        })
        .collect()
}

#[test]
fn batch_isolates_a_corrupted_item() {
    let dir = tempfile::tempdir().unwrap();
    let items = write_items(dir.path(), 10, Some(6));
    let report = run_batch(&quick(), &items, &dir.path().join("out")).unwrap();
    assert_eq!((report.succeeded, report.failed), (9, 1));
    let failed: Vec<_> = report.items.iter().filter(|i| i.error.is_some()).map(|i| i.id.as_str()).collect();
    assert_eq!(failed, ["item6"]);
    for item in report.items.iter().filter(|i| i.error.is_none()) {
        assert!(item.output_dir.join("pano180.png").is_file());
    }
    assert!(dir.path().join("out/batch.json").is_file());
}

#[test]
fn batch_all_failed_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let items: Vec<_> = (0..3)
        .map(|k| BatchItem { id: format!("x{k}"), input: dir.path().join("missing.png"), ground_truth: None })
        .collect();
    assert!(matches!(run_batch(&quick(), &items, dir.path()), Err(Error::Batch(3))));
    assert!(matches!(run_batch(&quick(), &[], dir.path()), Err(Error::Input(_))));
}

#[test]
fn batch_scores_against_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let mut items = write_items(dir.path(), 2, None);
    for (k, item) in items.iter_mut().enumerate() {
        let gt = dir.path().join(format!("gt{k}.png"));
        outpano_core::projection::hemisphere_window(&common::smooth_sphere(256, k as u64), 0.0)
            .unwrap()
            .image()
            .save(&gt)
            .unwrap();
        item.ground_truth = Some(gt);
    }
    let report = run_batch(&quick(), &items, &dir.path().join("out")).unwrap();
    let metrics = report.metrics.unwrap();
    assert_eq!(metrics.rows.len(), 2);
    assert!(metrics.overall.mean_psnr.is_finite() && metrics.overall.mean_psnr > 10.0);
}
