//! Peripheral content generators.
//!
//! Every generator maps an input raster to a 256×256 output for one of the two
//! stages. Built-ins work purely in the image plane; neural generators run as
//! external processes (see [`external`]).

mod external;
mod patch;

pub use external::{external_generate, render_command};
pub use patch::{patch_extrapolate, PatchParams};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projection::Coverage;
use crate::raster::RasterImage;

/// Fixed side of every generator's input and output domain.
pub const NETWORK_SIZE: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorStage {
    /// Narrow input → 90° perspective image.
    Near,
    /// 90° perspective image → 180° equirectangular image.
    Mid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageDomain {
    Perspective,
    Equirect(Coverage),
}

impl GeneratorStage {
    pub fn input_domain(self) -> ImageDomain {
        ImageDomain::Perspective
    }

    pub fn output_domain(self) -> ImageDomain {
        match self {
            GeneratorStage::Near => ImageDomain::Perspective,
            GeneratorStage::Mid => ImageDomain::Equirect(Coverage::Hemisphere),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GeneratorStage::Near => "near",
            GeneratorStage::Mid => "mid",
        }
    }
}

impl fmt::Display for GeneratorStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GeneratorStage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "near" => Ok(GeneratorStage::Near),
            "mid" => Ok(GeneratorStage::Mid),
            other => Err(Error::Input(format!("unknown stage `{other}` (expected near or mid)"))),
        }
    }
}

/// Anything that can produce the peripheral content for a stage.
pub trait Generator: Send + Sync {
    /// Returns a `NETWORK_SIZE` square raster in `[0, 1]`.
    fn generate(&self, input: &RasterImage, stage: GeneratorStage, seed: u64) -> Result<RasterImage>;
}

impl<F> Generator for F
where
    F: Fn(&RasterImage, GeneratorStage) -> Result<RasterImage> + Send + Sync,
{
    fn generate(&self, input: &RasterImage, stage: GeneratorStage, _seed: u64) -> Result<RasterImage> {
        self(input, stage)
    }
}

/// Which generator backs a stage. Serialized with a `kind` tag, e.g.
/// `{"kind": "patch_extrapolate", "patch_size": 7}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    ResizeBaseline,
    MirrorPad,
    PatchExtrapolate(PatchParams),
    /// Command template with `{input}`, `{output}` and `{stage}`
    /// placeholders, or `{input_list}` for batch mode.
    External { command: String },
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec::PatchExtrapolate(PatchParams::default())
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            GeneratorSpec::PatchExtrapolate(params) => params.validate(),
            GeneratorSpec::External { command } => {
                let has_io = (command.contains("{input}") && command.contains("{output}")) || command.contains("{input_list}");
                if command.trim().is_empty() || !has_io {
                    return Err(Error::Input(format!(
                        "external command needs {{input}} and {{output}} (or {{input_list}}) placeholders: `{command}`"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

impl Generator for GeneratorSpec {
    fn generate(&self, input: &RasterImage, stage: GeneratorStage, seed: u64) -> Result<RasterImage> {
        match self {
            GeneratorSpec::ResizeBaseline => Ok(resize_baseline(input, stage)),
            GeneratorSpec::MirrorPad => Ok(mirror_pad(input)),
            GeneratorSpec::PatchExtrapolate(params) => {
                let (canvas, known) = centered_canvas(input);
                patch_extrapolate(&canvas, &known, params, seed)
            }
            GeneratorSpec::External { command } => {
                self.validate()?;
                let dir = tempfile::tempdir()?;
                let path = dir.path().join("input.png");
                preprocess_input(input, stage).save(&path)?;
                let mut out = external_generate(command, &[path], stage)?;
                Ok(out.remove(0))
            }
        }
    }
}

/// Resizes (never pads) to the network domain. Resizing breaks the pixel
/// alignment between input and output that lets a skip-connected network
/// copy the input straight through and leave a halo at its border.
pub fn preprocess_input(img: &RasterImage, _stage: GeneratorStage) -> RasterImage {
    img.resize(NETWORK_SIZE, NETWORK_SIZE)
}

/// Stretches the input over the whole output domain; no new content.
pub fn resize_baseline(input: &RasterImage, stage: GeneratorStage) -> RasterImage {
    preprocess_input(input, stage)
}

/// The input at half scale in the middle of a 256² canvas, plus the mask of
/// the pixels it covers.
pub fn centered_canvas(input: &RasterImage) -> (RasterImage, Vec<bool>) {
    let inner = NETWORK_SIZE / 2;
    let offset = (NETWORK_SIZE - inner) / 2;
    let mut canvas = RasterImage::new(NETWORK_SIZE, NETWORK_SIZE);
    canvas.paste(&input.resize(inner, inner), offset, offset).expect("inner square fits");
    let known = (0..NETWORK_SIZE * NETWORK_SIZE)
        .map(|i| {
            let (x, y) = (i % NETWORK_SIZE, i / NETWORK_SIZE);
            (offset..offset + inner).contains(&x) && (offset..offset + inner).contains(&y)
        })
        .collect();
    (canvas, known)
}

/// Places the input at half scale in the center and fills the border by
/// symmetric reflection.
pub fn mirror_pad(input: &RasterImage) -> RasterImage {
    let inner = NETWORK_SIZE / 2;
    let offset = ((NETWORK_SIZE - inner) / 2) as isize;
    let small = input.resize(inner, inner);
    let reflect = |t: isize| {
        let n = inner as isize;
        let m = t.rem_euclid(2 * n);
        (if m < n { m } else { 2 * n - 1 - m }) as usize
    };
    RasterImage::from_fn(NETWORK_SIZE, NETWORK_SIZE, |x, y| {
        small.get(reflect(x as isize - offset), reflect(y as isize - offset))
    })
}
