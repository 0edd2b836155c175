mod common;

use std::fs;
use std::path::{Path, PathBuf};

use outpano_core::generator::{external_generate, patch_extrapolate, Generator, GeneratorSpec, GeneratorStage, PatchParams};
use outpano_core::projection::make_pairs;
use outpano_core::{Error, RasterImage};

fn stripe(x: usize) -> f64 {
    0.5 + 0.35 * (std::f64::consts::TAU * x as f64 / 16.0).sin()
}

#[test]
fn stripes_continue_with_their_period() {
    let n = 128;
    let offset = n / 4;
    let known: Vec<bool> = (0..n * n)
        .map(|i| {
            let (x, y) = (i % n, i / n);
            (offset..offset + n / 2).contains(&x) && (offset..offset + n / 2).contains(&y)
        })
        .collect();
    let canvas = RasterImage::from_fn(n, n, |x, y| if known[y * n + x] { [stripe(x); 3] } else { [0.0; 3] });
    let out = patch_extrapolate(&canvas, &known, &PatchParams::default(), 3).unwrap();
    let truth = RasterImage::from_fn(n, n, |x, _| [stripe(x); 3]);
    let (mut err, mut count) = (0.0, 0);
    for (i, k) in known.iter().enumerate() {
        if !k {
            let (x, y) = (i % n, i / n);
            err += (out.get(x, y)[0] - truth.get(x, y)[0]).abs();
            count += 1;
        }
    }
    let mae = err / count as f64;
    assert!(mae < 0.05, "stripe continuation MAE {mae}");
}

#[test]
fn every_builtin_maps_to_network_domain() {
    let inputs = [
        RasterImage::filled(64, 64, [0.2, 0.4, 0.6]),
        RasterImage::from_fn(97, 130, |x, y| [(x % 7) as f64 / 6.0, (y % 5) as f64 / 4.0, 0.5]),
    ];
    let specs = [GeneratorSpec::ResizeBaseline, GeneratorSpec::MirrorPad, GeneratorSpec::PatchExtrapolate(PatchParams::default())];
    for spec in &specs {
        for stage in [GeneratorStage::Near, GeneratorStage::Mid] {
            for input in &inputs {
                let out = spec.generate(input, stage, 0).unwrap();
                assert_eq!(out.dims(), (256, 256), "{spec:?} {stage}");
                out.validate().unwrap();
            }
        }
    }
}

fn python_available() -> bool {
    std::process::Command::new("python3").args(["-c", "import PIL"]).status().map(|s| s.success()).unwrap_or(false)
}

/// Writes a fixture that rotates channels (R, G, B) → (G, B, R): a 120° hue
/// shift that is exact on 8-bit data.
fn hue_script(dir: &Path) -> PathBuf {
    let script = dir.join("hue.py");
    fs::write(
        &script,
        r#"import sys
from PIL import Image

def shift(src, dst):
    r, g, b = Image.open(src).convert("RGB").split()
    Image.merge("RGB", (g, b, r)).save(dst)

if sys.argv[1] == "--list":
    for line in open(sys.argv[2]):
        src, dst = line.rstrip("\n").split("\t")
        shift(src, dst)
else:
    shift(sys.argv[1], sys.argv[2])
"#,
    )
    .unwrap();
    script
}

fn dataset_inputs(dir: &Path) -> Vec<PathBuf> {
    let pano = common::textured_sphere(128, 6);
    make_pairs(&pano, 256)
        .unwrap()
        .into_iter()
        .map(|p| {
            let path = dir.join(format!("{}.png", p.direction));
            p.input_narrow.save(&path).unwrap();
            path
        })
        .collect()
}

fn assert_hue_shifted(inputs: &[PathBuf], outputs: &[RasterImage]) {
    assert_eq!(outputs.len(), inputs.len());
    for (path, out) in inputs.iter().zip(outputs) {
        let input = RasterImage::load(path).unwrap();
        let expected = RasterImage::from_fn(256, 256, |x, y| {
            let p = input.get(x, y);
            [p[1], p[2], p[0]]
        });
        assert_eq!(out, &expected, "{}", path.display());
    }
}

#[test]
fn external_hue_fixture_per_image() {
    if !python_available() {
        eprintln!("python3 with Pillow not available; skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let script = hue_script(dir.path());
    let inputs = dataset_inputs(dir.path());
    let template = format!("python3 '{}' {{input}} {{output}}", script.display());
    let outputs = external_generate(&template, &inputs, GeneratorStage::Near).unwrap();
    assert_hue_shifted(&inputs, &outputs);
}

#[test]
fn external_hue_fixture_batch_list() {
    if !python_available() {
        eprintln!("python3 with Pillow not available; skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let script = hue_script(dir.path());
    let inputs = dataset_inputs(dir.path());
    let template = format!("python3 '{}' --list {{input_list}}", script.display());
    let outputs = external_generate(&template, &inputs, GeneratorStage::Mid).unwrap();
    assert_hue_shifted(&inputs, &outputs);
}

#[test]
fn external_wrong_size_is_rejected() {
    if !python_available() {
        eprintln!("python3 with Pillow not available; skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.png");
    RasterImage::filled(256, 256, [0.5; 3]).save(&input).unwrap();
    let template = r#"python3 -c "import sys; from PIL import Image; Image.open(sys.argv[1]).resize((100, 100)).save(sys.argv[2])" {input} {output}"#;
    match external_generate(template, &[&input], GeneratorStage::Near) {
        Err(Error::ExternalGenerator { message, transcript }) => {
            assert!(message.contains("100x100"), "{message}");
            assert!(transcript.contains("python3"));
        }
        other => panic!("expected wrong-size error, got {other:?}"),
    }
}

#[test]
fn external_spec_resizes_non_network_input() {
    let spec = GeneratorSpec::External { command: "cp {input} {output}".into() };
    let input = RasterImage::filled(100, 80, [0.25, 0.5, 0.75]);
    let out = spec.generate(&input, GeneratorStage::Near, 0).unwrap();
    assert_eq!(out.dims(), (256, 256));
    let q = |v: f64| (v * 255.0).round() / 255.0;
    assert!(out.pixels().all(|p| p == [q(0.25), q(0.5), q(0.75)]));
}
