//! Training-pair construction from full-sphere panoramas.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{crop_central_quarter, extract_view, hemisphere_window, Coverage, Direction, EquirectPanorama, PairTriple, ViewSpec};
use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// Side of every stored pair image.
pub const PAIR_SIZE: usize = 256;

/// Side of the 90° view rendered before downsizing to [`PAIR_SIZE`].
pub const DEFAULT_NATIVE_SIZE: usize = 512;

/// Four triples (front, right, back, left) from one full-sphere panorama.
///
/// The near target is a 90°×90° gnomonic view rendered at `native_size` and
/// resized to 256²; the input is its central quarter, resized likewise; the
/// mid target is the 180°×180° equirectangular window around the same yaw.
pub fn make_pairs(pano: &EquirectPanorama, native_size: usize) -> Result<Vec<PairTriple>> {
    if pano.coverage() != Coverage::Sphere {
        return Err(Error::Input("pair extraction needs a full-sphere panorama".into()));
    }
    if native_size < 2 || native_size % 2 != 0 {
        return Err(Error::Dimension(format!("native size must be even and at least 2, got {native_size}")));
    }
    Direction::ALL
        .iter()
        .map(|&direction| {
            let view = ViewSpec::new(direction.yaw(), 0.0, 90.0, 90.0)?;
            let near = extract_view(pano, &view, native_size, native_size)?;
            let input_narrow = crop_central_quarter(&near)?.resize(PAIR_SIZE, PAIR_SIZE);
            let target_mid = hemisphere_window(pano, direction.yaw())?.into_image().resize(PAIR_SIZE, PAIR_SIZE);
            Ok(PairTriple { input_narrow, target_near: near.resize(PAIR_SIZE, PAIR_SIZE), target_mid, direction })
        })
        .collect()
}

/// One manifest line. Paths are relative to the dataset root.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRecord {
    pub pano_id: String,
    pub direction: Direction,
    pub input: String,
    pub near: String,
    pub mid: String,
}

impl PairRecord {
    pub fn id(&self) -> String {
        format!("{}/{}", self.pano_id, self.direction)
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct DatasetSummary {
    pub records: Vec<PairRecord>,
    /// Panoramas that could not be processed, with the reason.
    pub failures: Vec<(String, String)>,
    pub manifest: PathBuf,
}

fn is_image(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "jpg" | "jpeg")
    )
}

/// Writes `pairs/<pano-id>/<direction>/{input,near,mid}.png` under
/// `output_dir` for every panorama in `input_dir`, plus `manifest.jsonl`.
pub fn prepare_dataset(input_dir: &Path, output_dir: &Path, native_size: usize) -> Result<DatasetSummary> {
    let mut panos: Vec<PathBuf> = fs::read_dir(input_dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image(p))
        .collect();
    panos.sort();
    if panos.is_empty() {
        return Err(Error::Input(format!("no PNG/JPEG panoramas in {}", input_dir.display())));
    }

    let results: Vec<(String, Result<Vec<PairRecord>>)> = panos
        .par_iter()
        .map(|path| {
            let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let result = pairs_for_file(path, &id, output_dir, native_size);
            (id, result)
        })
        .collect();

    let mut summary = DatasetSummary { manifest: output_dir.join("manifest.jsonl"), ..Default::default() };
    for (id, result) in results {
        match result {
            Ok(records) => summary.records.extend(records),
            Err(e) => summary.failures.push((id, e.to_string())),
        }
    }

    let mut manifest = fs::File::create(&summary.manifest)?;
    for record in &summary.records {
        writeln!(manifest, "{}", serde_json::to_string(record)?)?;
    }
    Ok(summary)
}

fn pairs_for_file(path: &Path, id: &str, output_dir: &Path, native_size: usize) -> Result<Vec<PairRecord>> {
    let pano = EquirectPanorama::new(RasterImage::load(path)?, Coverage::Sphere)?;
    make_pairs(&pano, native_size)?
        .into_iter()
        .map(|pair| {
            let rel = format!("pairs/{id}/{}", pair.direction);
            let record = PairRecord {
                pano_id: id.to_string(),
                direction: pair.direction,
                input: format!("{rel}/input.png"),
                near: format!("{rel}/near.png"),
                mid: format!("{rel}/mid.png"),
            };
            pair.input_narrow.save(output_dir.join(&record.input))?;
            pair.target_near.save(output_dir.join(&record.near))?;
            pair.target_mid.save(output_dir.join(&record.mid))?;
            Ok(record)
        })
        .collect()
}

/// Reads a JSON-lines manifest written by [`prepare_dataset`].
pub fn read_manifest(path: &Path) -> Result<Vec<PairRecord>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}
