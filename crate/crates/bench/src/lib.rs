//! Deterministic fixtures shared by the benches under `benches/`.

use outpano_core::{Coverage, EquirectPanorama, RasterImage};

/// Smooth, non-periodic test image.
pub fn test_image(width: usize, height: usize) -> RasterImage {
    RasterImage::from_fn(width, height, |x, y| {
        let (u, v) = (x as f64 / width as f64, y as f64 / height as f64);
        [0.5 + 0.4 * (6.0 * u).sin() * (4.0 * v).cos(), v, 0.3 + 0.2 * (9.0 * u * v).sin()]
    })
}

pub fn test_sphere(height: usize) -> EquirectPanorama {
    EquirectPanorama::new(test_image(2 * height, height), Coverage::Sphere).expect("2:1 image")
}
