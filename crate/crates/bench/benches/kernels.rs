use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use outpano_bench::{test_image, test_sphere};
use outpano_core::fusion::{align_near_on, poisson_blend, FusionConfig, Preconditioner};
use outpano_core::generator::{centered_canvas, patch_extrapolate, PatchParams};
use outpano_core::metrics::psnr;
use outpano_core::pipeline::{run, PipelineConfig};
use outpano_core::projection::extract_view;
use outpano_core::ViewSpec;

fn poisson(c: &mut Criterion) {
    let mut group = c.benchmark_group("poisson");
    group.sample_size(10);
    let original = test_image(128, 128);
    let generated = test_image(200, 200);
    let composite = align_near_on(&original, &generated, 256, 256).unwrap();
    for pc in [Preconditioner::None, Preconditioner::Jacobi, Preconditioner::Mic] {
        let config = FusionConfig { preconditioner: pc, ..Default::default() };
        group.bench_with_input(BenchmarkId::from_parameter(format!("{pc:?}")), &config, |b, cfg| {
            b.iter(|| poisson_blend(&composite, cfg).unwrap())
        });
    }
    group.finish();
}

fn projection(c: &mut Criterion) {
    let pano = test_sphere(512);
    let view = ViewSpec::new(30.0, 10.0, 90.0, 90.0).unwrap();
    c.bench_function("extract_view_256", |b| b.iter(|| extract_view(&pano, &view, 256, 256).unwrap()));
}

fn patch(c: &mut Criterion) {
    let mut group = c.benchmark_group("patch_extrapolate");
    group.sample_size(10);
    let (canvas, known) = centered_canvas(&test_image(128, 128));
    group.bench_function("256", |b| b.iter(|| patch_extrapolate(&canvas, &known, &PatchParams::default(), 0).unwrap()));
    group.finish();
}

fn metrics(c: &mut Criterion) {
    let a = test_image(256, 256);
    let b = a.map(|v| v * 0.9);
    c.bench_function("psnr_256", |bench| bench.iter(|| psnr(&a, &b).unwrap()));
}

fn pipeline(c: &mut Criterion) {
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    let input = test_image(256, 256);
    let config = PipelineConfig::default();
    group.bench_function("default_512", |b| b.iter(|| run(&config, &input).unwrap()));
    group.finish();
}

criterion_group!(benches, poisson, projection, patch, metrics, pipeline);
criterion_main!(benches);
