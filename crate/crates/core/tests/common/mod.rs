#![allow(dead_code)]

use outpano_core::{Coverage, EquirectPanorama, RasterImage};

/// Smooth full-sphere panorama: colors are low-order functions of the unit
/// view direction, so there is no seam at ±180° and no pole singularity.
pub fn smooth_sphere(height: usize, variant: u64) -> EquirectPanorama {
    let w = 2 * height;
    let k = variant as f64;
    let img = RasterImage::from_fn(w, height, |x, y| {
        let lon = ((x as f64 + 0.5) / w as f64 - 0.5) * std::f64::consts::TAU;
        let lat = (0.5 - (y as f64 + 0.5) / height as f64) * std::f64::consts::PI;
        let (dx, dy, dz) = (lat.cos() * lon.sin(), lat.sin(), lat.cos() * lon.cos());
        [
            0.5 + 0.3 * (1.7 * dx + 0.9 * dy + 0.3 * k).sin(),
            0.5 + 0.25 * (2.1 * dz - 1.3 * dx + 0.7 * k).cos(),
            0.45 + 0.2 * (1.1 * dy + 1.9 * dz + k).sin() + 0.1 * dx * dz,
        ]
    });
    EquirectPanorama::new(img, Coverage::Sphere).unwrap()
}

/// Panorama with mid-frequency texture on top of the smooth field.
pub fn textured_sphere(height: usize, variant: u64) -> EquirectPanorama {
    let base = smooth_sphere(height, variant);
    let k = variant as f64;
    let img = RasterImage::from_fn(2 * height, height, |x, y| {
        let p = base.image().get(x, y);
        let t = 0.08 * ((x as f64 * 0.37 + k).sin() * (y as f64 * 0.23 - k).cos());
        [(p[0] + t).clamp(0.0, 1.0), (p[1] - t).clamp(0.0, 1.0), (p[2] + 0.5 * t).clamp(0.0, 1.0)]
    });
    EquirectPanorama::new(img, Coverage::Sphere).unwrap()
}

/// PSNR (peak 1) over the pixels where `mask` is set.
pub fn masked_psnr(a: &RasterImage, b: &RasterImage, mask: &[bool]) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for (i, &m) in mask.iter().enumerate() {
        if m {
            let (x, y) = (i % a.width(), i / a.width());
            let (p, q) = (a.get(x, y), b.get(x, y));
            for c in 0..3 {
                sum += (p[c] - q[c]).powi(2);
            }
            n += 3;
        }
    }
    let mse = sum / n as f64;
    -10.0 * mse.log10()
}
