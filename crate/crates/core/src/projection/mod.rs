//! Perspective ↔ equirectangular mapping.
//!
//! Conventions: longitude grows to the right (east), latitude grows upward,
//! `lon = 0, lat = 0` is the central meridian on the equator. Perspective views
//! are gnomonic (pinhole) with roll fixed at zero; camera space is x right,
//! y up, z forward. Sampling is bilinear everywhere; longitude wraps on full
//! spheres and latitude clamps at the poles.

mod dataset;

pub use dataset::{make_pairs, prepare_dataset, read_manifest, DatasetSummary, PairRecord, DEFAULT_NATIVE_SIZE, PAIR_SIZE};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Pixel, RasterImage};

/// Slack (degrees) when testing whether a ray falls inside a hemisphere.
const COVERAGE_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coverage {
    /// 180° of longitude centered on the central meridian.
    Hemisphere,
    /// Full 360° of longitude.
    Sphere,
}

impl Coverage {
    pub fn lon_span(self) -> f64 {
        match self {
            Coverage::Hemisphere => 180.0,
            Coverage::Sphere => 360.0,
        }
    }
}

/// Latitude span of every panorama, degrees.
pub const LAT_SPAN: f64 = 180.0;

/// An equirectangular raster with square angular pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct EquirectPanorama {
    image: RasterImage,
    coverage: Coverage,
}

impl EquirectPanorama {
    pub fn new(image: RasterImage, coverage: Coverage) -> Result<Self> {
        let (w, h) = image.dims();
        let expected_w = match coverage {
            Coverage::Hemisphere => h,
            Coverage::Sphere => 2 * h,
        };
        if w != expected_w {
            return Err(Error::Dimension(format!(
                "{coverage:?} panorama of height {h} must be {expected_w} wide, got {w}"
            )));
        }
        Ok(Self { image, coverage })
    }

    pub fn image(&self) -> &RasterImage {
        &self.image
    }

    pub fn into_image(self) -> RasterImage {
        self.image
    }

    pub fn coverage(&self) -> Coverage {
        self.coverage
    }

    pub fn lon_span(&self) -> f64 {
        self.coverage.lon_span()
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    /// Continuous pixel coordinate (pixel-center convention) of a direction.
    pub fn lonlat_to_pixel(&self, lon: f64, lat: f64) -> Result<(f64, f64)> {
        let half = self.lon_span() / 2.0;
        if !(lon.abs() <= half && lat.abs() <= 90.0) {
            return Err(Error::OutOfCoverage { lon, lat });
        }
        Ok(self.lonlat_to_pixel_unchecked(lon, lat))
    }

    #[inline]
    fn lonlat_to_pixel_unchecked(&self, lon: f64, lat: f64) -> (f64, f64) {
        let x = (lon / self.lon_span() + 0.5) * self.width() as f64 - 0.5;
        let y = (0.5 - lat / LAT_SPAN) * self.height() as f64 - 0.5;
        (x, y)
    }

    /// Inverse of [`lonlat_to_pixel`](Self::lonlat_to_pixel).
    pub fn pixel_to_lonlat(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let lon = ((x + 0.5) / self.width() as f64 - 0.5) * self.lon_span();
        let lat = (0.5 - (y + 0.5) / self.height() as f64) * LAT_SPAN;
        if !(lon.abs() <= self.lon_span() / 2.0 && lat.abs() <= 90.0) {
            return Err(Error::OutOfCoverage { lon, lat });
        }
        Ok((lon, lat))
    }

    /// Bilinear sample in direction `(lon, lat)`. Longitudes are wrapped into
    /// range on a sphere; on a hemisphere they must lie within ±90°.
    pub fn sample(&self, lon: f64, lat: f64) -> Result<Pixel> {
        let lon = match self.coverage {
            Coverage::Sphere => wrap_degrees(lon),
            Coverage::Hemisphere => {
                if !(lon.abs() <= 90.0 + COVERAGE_SLACK) {
                    return Err(Error::OutOfCoverage { lon, lat });
                }
                lon
            }
        };
        let (x, y) = self.lonlat_to_pixel_unchecked(lon, lat.clamp(-90.0, 90.0));
        Ok(self.image.sample_bilinear(x, y, self.coverage == Coverage::Sphere))
    }
}

/// Wraps degrees into `[-180, 180)`.
pub fn wrap_degrees(lon: f64) -> f64 {
    let w = (lon + 180.0).rem_euclid(360.0) - 180.0;
    if w >= 180.0 {
        -180.0
    } else {
        w
    }
}

/// Orientation and field of view of a perspective image (degrees).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewSpec {
    pub yaw: f64,
    pub pitch: f64,
    pub fov_h: f64,
    pub fov_v: f64,
}

impl ViewSpec {
    pub fn new(yaw: f64, pitch: f64, fov_h: f64, fov_v: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&pitch) {
            return Err(Error::Domain(format!("pitch must lie in [-90, 90], got {pitch}")));
        }
        for fov in [fov_h, fov_v] {
            if !(fov > 0.0 && fov < 180.0) {
                return Err(Error::Domain(format!("FoV must lie in (0, 180), got {fov}")));
            }
        }
        if !yaw.is_finite() {
            return Err(Error::Domain(format!("yaw must be finite, got {yaw}")));
        }
        Ok(Self { yaw: wrap_degrees(yaw), pitch, fov_h, fov_v })
    }

    /// Square-pixel view whose vertical FoV follows from the image aspect.
    pub fn with_aspect(yaw: f64, pitch: f64, fov_h: f64, width: usize, height: usize) -> Result<Self> {
        let half_h = (fov_h / 2.0).to_radians().tan();
        let fov_v = 2.0 * (half_h * height as f64 / width as f64).atan().to_degrees();
        Self::new(yaw, pitch, fov_h, fov_v)
    }

    fn rotation(&self) -> Rotation {
        let (sy, cy) = self.yaw.to_radians().sin_cos();
        let (sp, cp) = self.pitch.to_radians().sin_cos();
        Rotation { sy, cy, sp, cp }
    }

    fn half_tangents(&self) -> (f64, f64) {
        ((self.fov_h / 2.0).to_radians().tan(), (self.fov_v / 2.0).to_radians().tan())
    }
}

/// Pitch about x followed by yaw about y.
#[derive(Clone, Copy)]
struct Rotation {
    sy: f64,
    cy: f64,
    sp: f64,
    cp: f64,
}

impl Rotation {
    #[inline]
    fn camera_to_world(&self, [x, y, z]: [f64; 3]) -> [f64; 3] {
        let y1 = y * self.cp + z * self.sp;
        let z1 = -y * self.sp + z * self.cp;
        [x * self.cy + z1 * self.sy, y1, -x * self.sy + z1 * self.cy]
    }

    #[inline]
    fn world_to_camera(&self, [x, y, z]: [f64; 3]) -> [f64; 3] {
        let x1 = x * self.cy - z * self.sy;
        let z1 = x * self.sy + z * self.cy;
        [x1, y * self.cp - z1 * self.sp, y * self.sp + z1 * self.cp]
    }
}

#[inline]
fn direction_to_lonlat([x, y, z]: [f64; 3]) -> (f64, f64) {
    (x.atan2(z).to_degrees(), y.atan2(x.hypot(z)).to_degrees())
}

#[inline]
fn lonlat_to_direction(lon: f64, lat: f64) -> [f64; 3] {
    let (sl, cl) = lon.to_radians().sin_cos();
    let (sp, cp) = lat.to_radians().sin_cos();
    [cp * sl, sp, cp * cl]
}

/// Renders a `width x height` gnomonic view of `pano`.
pub fn extract_view(pano: &EquirectPanorama, view: &ViewSpec, width: usize, height: usize) -> Result<RasterImage> {
    if width == 0 || height == 0 {
        return Err(Error::Dimension(format!("empty view {width}x{height}")));
    }
    let rot = view.rotation();
    let (th, tv) = view.half_tangents();
    let mut out = RasterImage::new(width, height);
    for j in 0..height {
        let v = (1.0 - 2.0 * (j as f64 + 0.5) / height as f64) * tv;
        for i in 0..width {
            let u = (2.0 * (i as f64 + 0.5) / width as f64 - 1.0) * th;
            let (lon, lat) = direction_to_lonlat(rot.camera_to_world([u, v, 1.0]));
            out.set(i, j, pano.sample(lon, lat)?);
        }
    }
    Ok(out)
}

/// Projects a perspective image onto `canvas`. Returns the updated panorama
/// and a row-major mask of the pixels that were written; all other pixels are
/// left untouched.
pub fn insert_view(canvas: &EquirectPanorama, image: &RasterImage, view: &ViewSpec) -> Result<(EquirectPanorama, Vec<bool>)> {
    let rot = view.rotation();
    let (th, tv) = view.half_tangents();
    let (w, h) = (image.width() as f64, image.height() as f64);
    let mut out = canvas.image.clone();
    let mut mask = vec![false; canvas.width() * canvas.height()];
    for y in 0..canvas.height() {
        for x in 0..canvas.width() {
            let (lon, lat) = canvas.pixel_to_lonlat(x as f64, y as f64)?;
            let [cx, cy, cz] = rot.world_to_camera(lonlat_to_direction(lon, lat));
            if cz <= 0.0 {
                continue;
            }
            let u = cx / cz / th;
            let v = cy / cz / tv;
            if u.abs() > 1.0 || v.abs() > 1.0 {
                continue;
            }
            let px = (u + 1.0) / 2.0 * w - 0.5;
            let py = (1.0 - v) / 2.0 * h - 0.5;
            out.set(x, y, image.sample_bilinear(px, py, false));
            mask[y * canvas.width() + x] = true;
        }
    }
    Ok((EquirectPanorama { image: out, coverage: canvas.coverage }, mask))
}

/// The centered half-width, half-height window. With an odd half size the
/// window leans toward the top-left.
pub fn crop_central_quarter(img: &RasterImage) -> Result<RasterImage> {
    let (w, h) = img.dims();
    if w % 2 != 0 || h % 2 != 0 {
        return Err(Error::Dimension(format!("central quarter needs even dimensions, got {w}x{h}")));
    }
    let (cw, ch) = (w / 2, h / 2);
    img.crop((w - cw) / 2, (h - ch) / 2, cw, ch)
}

/// The 180°×180° window of a full sphere centered on longitude `center_lon`,
/// at the source's native angular resolution. Exact column copies when the
/// window edge falls on a pixel boundary, bilinear resampling otherwise.
pub fn hemisphere_window(pano: &EquirectPanorama, center_lon: f64) -> Result<EquirectPanorama> {
    if pano.coverage != Coverage::Sphere {
        return Err(Error::Input("hemisphere window needs a full-sphere panorama".into()));
    }
    let h = pano.height();
    let w = pano.width();
    let offset = (wrap_degrees(center_lon - 90.0) + 180.0) / 360.0 * w as f64;
    let rounded = offset.round();
    let image = if (offset - rounded).abs() < 1e-9 {
        let start = rounded as usize;
        RasterImage::from_fn(h, h, |x, y| pano.image.get((start + x) % w, y))
    } else {
        RasterImage::from_fn(h, h, |x, y| pano.image.sample_bilinear(offset + x as f64, y as f64, true))
    };
    EquirectPanorama::new(image, Coverage::Hemisphere)
}

/// Doubles a 180° panorama to 360° by reflecting the front hemisphere about
/// the ±90° meridians. The front half is copied bit-for-bit.
pub fn mirror_extend(pano: &EquirectPanorama) -> Result<EquirectPanorama> {
    if pano.coverage != Coverage::Hemisphere {
        return Err(Error::Input("mirror extension needs a 180° panorama".into()));
    }
    let w = pano.width();
    if w % 2 != 0 {
        return Err(Error::Dimension(format!("mirror extension needs an even width, got {w}")));
    }
    let offset = (w / 2) as isize;
    let wi = w as isize;
    let image = RasterImage::from_fn(2 * w, pano.height(), |x, y| {
        let j = x as isize - offset;
        let src = if j < 0 {
            -1 - j
        } else if j >= wi {
            2 * wi - 1 - j
        } else {
            j
        };
        pano.image.get(src as usize, y)
    });
    EquirectPanorama::new(image, Coverage::Sphere)
}

/// One of the four horizon-level pair directions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Front,
    Right,
    Back,
    Left,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Front, Direction::Right, Direction::Back, Direction::Left];

    pub fn yaw(self) -> f64 {
        match self {
            Direction::Front => 0.0,
            Direction::Right => 90.0,
            Direction::Back => 180.0,
            Direction::Left => -90.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Front => "front",
            Direction::Right => "right",
            Direction::Back => "back",
            Direction::Left => "left",
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A training triple for one direction: the narrow input, the 90° near
/// target and the 180° equirectangular mid target, all `PAIR_SIZE` square.
#[derive(Clone, Debug)]
pub struct PairTriple {
    pub input_narrow: RasterImage,
    pub target_near: RasterImage,
    pub target_mid: RasterImage,
    pub direction: Direction,
}
