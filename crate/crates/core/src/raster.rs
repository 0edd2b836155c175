//! The RGB floating-point raster shared by every stage.
//!
//! Samples are stored interleaved, row-major, as `f64` in `[0, 1]`. Pixel `i`
//! spans `[i, i + 1)` so its center sits at `i + 0.5`; continuous coordinates
//! passed to the samplers are expressed relative to pixel centers (`x = 0.0`
//! is the center of the first column).

use std::path::Path;

use image::{ImageBuffer, Rgb, RgbImage};

use crate::error::{Error, Result};

pub type Pixel = [f64; 3];

#[derive(Clone, Debug, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RasterImage {
    /// Black image. Panics on a zero dimension.
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, [0.0; 3])
    }

    pub fn filled(width: usize, height: usize, value: Pixel) -> Self {
        assert!(width >= 1 && height >= 1, "raster dimensions must be at least 1x1");
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&value);
        }
        Self { width, height, data }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Pixel) -> Self {
        let mut img = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                img.set(x, y, f(x, y));
            }
        }
        img
    }

    /// Wraps interleaved RGB samples, checking the length and the `[0, 1]` range.
    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!("empty raster {width}x{height}")));
        }
        if data.len() != width * height * 3 {
            return Err(Error::Dimension(format!(
                "expected {} samples for {width}x{height}, got {}",
                width * height * 3,
                data.len()
            )));
        }
        let img = Self { width, height, data };
        img.validate()?;
        Ok(img)
    }

    /// Builds an image from three planar channels, clamping into `[0, 1]`.
    pub fn from_planes(width: usize, height: usize, planes: &[Vec<f64>; 3]) -> Self {
        let mut img = Self::new(width, height);
        for (i, px) in img.data.chunks_exact_mut(3).enumerate() {
            for c in 0..3 {
                px[c] = planes[c][i].clamp(0.0, 1.0);
            }
        }
        img
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Pixel {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: Pixel) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&value);
    }

    /// One channel as a row-major plane.
    pub fn plane(&self, channel: usize) -> Vec<f64> {
        self.data.iter().skip(channel).step_by(3).copied().collect()
    }

    pub fn pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    pub fn validate(&self) -> Result<()> {
        match self.data.iter().position(|v| !(v.is_finite() && (0.0..=1.0).contains(v))) {
            None => Ok(()),
            Some(i) => Err(Error::Input(format!(
                "sample {} at pixel ({}, {}) outside [0, 1]",
                self.data[i],
                (i / 3) % self.width,
                (i / 3) / self.width
            ))),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { width: self.width, height: self.height, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Bilinear sample at continuous pixel-center coordinates. Rows always
    /// clamp; columns wrap modulo the width when `wrap_x` is set, else clamp.
    pub fn sample_bilinear(&self, x: f64, y: f64, wrap_x: bool) -> Pixel {
        let (w, h) = (self.width as isize, self.height as isize);
        let yc = y.clamp(0.0, (h - 1) as f64);
        let y0 = yc.floor() as isize;
        let y1 = (y0 + 1).min(h - 1);
        let fy = yc - y0 as f64;

        let (x0, x1, fx) = if wrap_x {
            let x0 = x.floor();
            let fx = x - x0;
            let x0 = (x0 as isize).rem_euclid(w);
            (x0, (x0 + 1).rem_euclid(w), fx)
        } else {
            let xc = x.clamp(0.0, (w - 1) as f64);
            let x0 = xc.floor() as isize;
            (x0, (x0 + 1).min(w - 1), xc - x0 as f64)
        };

        let p00 = self.get(x0 as usize, y0 as usize);
        let p10 = self.get(x1 as usize, y0 as usize);
        let p01 = self.get(x0 as usize, y1 as usize);
        let p11 = self.get(x1 as usize, y1 as usize);
        let mut out = [0.0; 3];
        for c in 0..3 {
            let top = p00[c] + (p10[c] - p00[c]) * fx;
            let bottom = p01[c] + (p11[c] - p01[c]) * fx;
            out[c] = top + (bottom - top) * fy;
        }
        out
    }

    /// Resamples to `width x height`. Each axis is handled separately:
    /// area averaging when shrinking, bilinear when enlarging, a copy when
    /// the size is unchanged.
    pub fn resize(&self, width: usize, height: usize) -> Self {
        assert!(width >= 1 && height >= 1, "resize target must be at least 1x1");
        if (width, height) == self.dims() {
            return self.clone();
        }
        let xw = axis_weights(self.width, width);
        let yw = axis_weights(self.height, height);

        let mut rows = vec![0.0; width * self.height * 3];
        for y in 0..self.height {
            for (x, taps) in xw.iter().enumerate() {
                let mut acc = [0.0; 3];
                for &(sx, wt) in taps {
                    let p = self.get(sx, y);
                    for c in 0..3 {
                        acc[c] += wt * p[c];
                    }
                }
                let i = (y * width + x) * 3;
                rows[i..i + 3].copy_from_slice(&acc);
            }
        }

        let mut out = Self::new(width, height);
        for (y, taps) in yw.iter().enumerate() {
            for x in 0..width {
                let mut acc = [0.0; 3];
                for &(sy, wt) in taps {
                    let i = (sy * width + x) * 3;
                    for c in 0..3 {
                        acc[c] += wt * rows[i + c];
                    }
                }
                out.set(x, y, acc.map(|v| v.clamp(0.0, 1.0)));
            }
        }
        out
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 || x0 + width > self.width || y0 + height > self.height {
            return Err(Error::Dimension(format!(
                "crop {width}x{height}+{x0}+{y0} outside {}x{}",
                self.width, self.height
            )));
        }
        Ok(Self::from_fn(width, height, |x, y| self.get(x0 + x, y0 + y)))
    }

    /// Copies `other` into `self` with its top-left corner at `(x0, y0)`.
    pub fn paste(&mut self, other: &RasterImage, x0: usize, y0: usize) -> Result<()> {
        if x0 + other.width > self.width || y0 + other.height > self.height {
            return Err(Error::Geometry(format!(
                "{}x{} at ({x0}, {y0}) does not fit in {}x{}",
                other.width, other.height, self.width, self.height
            )));
        }
        for y in 0..other.height {
            let src = &other.data[y * other.width * 3..(y + 1) * other.width * 3];
            let start = ((y0 + y) * self.width + x0) * 3;
            self.data[start..start + src.len()].copy_from_slice(src);
        }
        Ok(())
    }

    pub fn flip_horizontal(&self) -> Self {
        Self::from_fn(self.width, self.height, |x, y| self.get(self.width - 1 - x, y))
    }

    pub fn from_rgb8(img: &RgbImage) -> Self {
        let (w, h) = img.dimensions();
        let data = img.as_raw().iter().map(|&v| f64::from(v) / 255.0).collect();
        Self { width: w as usize, height: h as usize, data }
    }

    pub fn to_rgb8(&self) -> RgbImage {
        ImageBuffer::from_fn(self.width as u32, self.height as u32, |x, y| {
            let p = self.get(x as usize, y as usize);
            Rgb(p.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8))
        })
    }

    /// Reads any PNG or JPEG; non-RGB inputs are converted to 8-bit RGB.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|source| Error::Image { path: path.to_path_buf(), source })?;
        Ok(Self::from_rgb8(&img.to_rgb8()))
    }

    /// Writes an 8-bit RGB image; the format follows the file extension.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        self.to_rgb8()
            .save(path)
            .map_err(|source| Error::Image { path: path.to_path_buf(), source })
    }
}

/// Per-destination-index taps `(source index, weight)` for one axis.
fn axis_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    if src == dst {
        return (0..dst).map(|i| vec![(i, 1.0)]).collect();
    }
    if dst < src {
        // Box filter: destination i covers [i*s, (i+1)*s) in source units.
        let s = src as f64 / dst as f64;
        (0..dst)
            .map(|i| {
                let lo = i as f64 * s;
                let hi = lo + s;
                let first = lo.floor() as usize;
                let last = (hi.ceil() as usize).min(src);
                (first..last)
                    .filter_map(|j| {
                        let overlap = (hi.min(j as f64 + 1.0) - lo.max(j as f64)).max(0.0);
                        (overlap > 0.0).then_some((j, overlap / s))
                    })
                    .collect()
            })
            .collect()
    } else {
        let scale = dst as f64 / src as f64;
        (0..dst)
            .map(|i| {
                let pos = ((i as f64 + 0.5) / scale - 0.5).clamp(0.0, (src - 1) as f64);
                let j0 = pos.floor() as usize;
                let j1 = (j0 + 1).min(src - 1);
                let f = pos - j0 as f64;
                if f == 0.0 || j0 == j1 {
                    vec![(j0, 1.0)]
                } else {
                    vec![(j0, 1.0 - f), (j1, f)]
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> RasterImage {
        RasterImage::from_fn(w, h, |x, y| {
            let v = (x as f64 + 0.5) / w as f64;
            [v, (y as f64 + 0.5) / h as f64, 0.25]
        })
    }

    #[test]
    fn resize_identity_is_a_copy() {
        let img = ramp(17, 9);
        assert_eq!(img.resize(17, 9), img);
    }

    #[test]
    fn downscale_by_two_averages_blocks() {
        let img = RasterImage::from_fn(4, 2, |x, _| [x as f64 / 4.0, 0.0, 1.0]);
        let small = img.resize(2, 1);
        assert_eq!(small.get(0, 0), [0.125, 0.0, 1.0]);
        assert_eq!(small.get(1, 0), [0.625, 0.0, 1.0]);
    }

    #[test]
    fn upscale_keeps_linear_ramp_linear_inside() {
        let img = ramp(8, 8);
        let big = img.resize(16, 16);
        // Away from the clamped border the bilinear upscale of a pixel-center
        // ramp reproduces the ramp at the new pixel centers.
        for x in 1..15 {
            let expected = (x as f64 + 0.5) / 16.0;
            assert!((big.get(x, 5)[0] - expected).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn constant_survives_any_resize() {
        let img = RasterImage::filled(13, 7, [0.3, 0.6, 0.9]);
        for (w, h) in [(5, 3), (29, 31), (13, 20), (1, 1)] {
            for p in img.resize(w, h).pixels() {
                for c in 0..3 {
                    assert!((p[c] - [0.3, 0.6, 0.9][c]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn bilinear_wraps_columns() {
        let img = RasterImage::from_fn(4, 1, |x, _| [x as f64 / 4.0, 0.0, 0.0]);
        // Halfway between the last column (0.75) and the first (0.0).
        let p = img.sample_bilinear(3.5, 0.0, true);
        assert!((p[0] - 0.375).abs() < 1e-12);
        let clamped = img.sample_bilinear(3.5, 0.0, false);
        assert_eq!(clamped[0], 0.75);
    }

    #[test]
    fn from_vec_rejects_out_of_range() {
        assert!(RasterImage::from_vec(1, 1, vec![0.0, 1.5, 0.0]).is_err());
        assert!(RasterImage::from_vec(1, 1, vec![0.0, f64::NAN, 0.0]).is_err());
        assert!(RasterImage::from_vec(2, 1, vec![0.0; 3]).is_err());
    }

    #[test]
    fn crop_and_paste_round_trip() {
        let img = ramp(10, 6);
        let part = img.crop(2, 1, 5, 3).unwrap();
        let mut canvas = RasterImage::new(10, 6);
        canvas.paste(&part, 2, 1).unwrap();
        assert_eq!(canvas.get(4, 2), img.get(4, 2));
        assert!(img.crop(8, 0, 5, 1).is_err());
    }

    #[test]
    fn png_round_trip_quantizes_to_8_bits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ramp.png");
        let img = ramp(16, 4);
        img.save(&path).unwrap();
        let back = RasterImage::load(&path).unwrap();
        assert_eq!(back.dims(), (16, 4));
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }
}
