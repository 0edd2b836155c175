//! Foveated panoramic outpainting.
//!
//! A narrow field-of-view image is expanded to a 180° equirectangular panorama
//! in two generation stages (narrow → 90° near periphery, 90° → 180° mid
//! periphery), each followed by gradient-domain fusion that keeps the
//! higher-resolution content fixed and blends the generated periphery into it.
//!
//! Module map:
//! - [`foveation`]: peripheral resolution model and field-of-view geometry.
//! - [`projection`]: perspective ↔ equirectangular mapping, dataset pairs,
//!   mirror extension to 360°.
//! - [`generator`]: built-in peripheral generators and the external
//!   generator process protocol.
//! - [`fusion`]: alignment and discrete Poisson blending.
//! - [`metrics`]: PSNR / NRMSE and directory evaluation.
//! - [`pipeline`]: end-to-end orchestration.

pub mod error;
pub mod foveation;
pub mod fusion;
pub mod generator;
pub mod metrics;
pub mod pipeline;
pub mod projection;
pub mod raster;

pub use error::{Error, Result};
pub use foveation::{ExtensionGeometry, FoveatedLayout, FoveationModel, ProfileRow};
pub use fusion::{BlendMask, FusionConfig, FusionMethod, Label};
pub use generator::{Generator, GeneratorSpec, GeneratorStage, PatchParams};
pub use metrics::{MetricReport, MetricRow};
pub use pipeline::{PipelineConfig, PipelineOutput, RunManifest};
pub use projection::{Coverage, Direction, EquirectPanorama, PairTriple, ViewSpec};
pub use raster::RasterImage;
