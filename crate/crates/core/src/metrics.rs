//! Full-reference quality metrics and directory evaluation.
//!
//! PSNR uses a peak of 1 on `[0, 1]` samples, which is numerically identical
//! to peak 255 on 8-bit data. NRMSE normalizes by the dynamic range of the
//! reference. Identical images have infinite PSNR; reports serialize it as
//! the string `"inf"`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::generator::GeneratorStage;
use crate::projection::PairRecord;
use crate::raster::RasterImage;

fn check_dims(a: &RasterImage, b: &RasterImage) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::Input(format!("image sizes differ: {:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

pub fn mse(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    check_dims(a, b)?;
    let sum: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.data().len() as f64)
}

/// Peak signal-to-noise ratio in dB; `f64::INFINITY` for identical images.
pub fn psnr(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    let m = mse(a, b)?;
    Ok(if m == 0.0 { f64::INFINITY } else { -10.0 * m.log10() })
}

/// RMSE of `a` against `reference`, divided by the reference's value range.
pub fn nrmse(a: &RasterImage, reference: &RasterImage) -> Result<f64> {
    let m = mse(a, reference)?;
    let (lo, hi) = reference
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if range <= 0.0 {
        return Err(Error::Input("reference image is constant; NRMSE normalization undefined".into()));
    }
    Ok(m.sqrt() / range)
}

fn serialize_db<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

fn format_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.6}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricRow {
    pub id: String,
    pub direction: String,
    #[serde(serialize_with = "serialize_db")]
    pub psnr: f64,
    pub nrmse: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Aggregate {
    pub count: usize,
    #[serde(serialize_with = "serialize_db")]
    pub mean_psnr: f64,
    pub mean_nrmse: f64,
}

impl Aggregate {
    fn of<'a>(rows: impl Iterator<Item = &'a MetricRow>) -> Self {
        let (mut n, mut p, mut e) = (0usize, 0.0, 0.0);
        for r in rows {
            n += 1;
            p += r.psnr;
            e += r.nrmse;
        }
        if n == 0 {
            return Self::default();
        }
        Self { count: n, mean_psnr: p / n as f64, mean_nrmse: e / n as f64 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
    pub overall: Aggregate,
    pub per_direction: BTreeMap<String, Aggregate>,
    /// Manifest ids with no prediction file.
    pub missing: Vec<String>,
    /// Pairs that exist but could not be scored, with the reason.
    pub failed: Vec<(String, String)>,
}

impl MetricReport {
    pub fn from_rows(rows: Vec<MetricRow>, missing: Vec<String>, failed: Vec<(String, String)>) -> Self {
        let overall = Aggregate::of(rows.iter());
        let mut dirs: BTreeMap<String, Vec<&MetricRow>> = BTreeMap::new();
        for r in &rows {
            dirs.entry(r.direction.clone()).or_default().push(r);
        }
        let per_direction = dirs.into_iter().map(|(d, rs)| (d, Aggregate::of(rs.into_iter()))).collect();
        Self { rows, overall, per_direction, missing, failed }
    }

    /// `id,direction,psnr,nrmse` with one row per scored pair.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,direction,psnr,nrmse\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{:.8}", r.id, r.direction, format_db(r.psnr), r.nrmse);
        }
        out
    }
}

/// Scores every manifest pair for `stage` (the `near` or `mid` target).
/// Predictions live at the same relative path under `pred_dir` as the
/// ground truth under `gt_dir`.
pub fn evaluate(pred_dir: &Path, gt_dir: &Path, manifest: &[PairRecord], stage: GeneratorStage) -> Result<MetricReport> {
    enum Outcome {
        Row(MetricRow),
        Missing(String),
        Failed(String, String),
    }

    let outcomes: Vec<Outcome> = manifest
        .par_iter()
        .map(|rec| {
            let rel = match stage {
                GeneratorStage::Near => &rec.near,
                GeneratorStage::Mid => &rec.mid,
            };
            let (pred, gt) = (pred_dir.join(rel), gt_dir.join(rel));
            if !pred.is_file() || !gt.is_file() {
                return Outcome::Missing(rec.id());
            }
            let scored = (|| {
                let (p, g) = (RasterImage::load(&pred)?, RasterImage::load(&gt)?);
                Ok::<_, Error>(MetricRow {
                    id: rec.id(),
                    direction: rec.direction.to_string(),
                    psnr: psnr(&p, &g)?,
                    nrmse: nrmse(&p, &g)?,
                })
            })();
            match scored {
                Ok(row) => Outcome::Row(row),
                Err(e) => Outcome::Failed(rec.id(), e.to_string()),
            }
        })
        .collect();

    let (mut rows, mut missing, mut failed) = (Vec::new(), Vec::new(), Vec::new());
    for o in outcomes {
        match o {
            Outcome::Row(r) => rows.push(r),
            Outcome::Missing(id) => missing.push(id),
            Outcome::Failed(id, why) => failed.push((id, why)),
        }
    }
    if rows.is_empty() && failed.is_empty() {
        return Err(Error::Input("no manifest pair has both a prediction and a ground truth".into()));
    }
    Ok(MetricReport::from_rows(rows, missing, failed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient() -> RasterImage {
        RasterImage::from_fn(32, 32, |x, y| [x as f64 / 31.0, y as f64 / 31.0, ((x + y) % 2) as f64 * 0.5])
    }

    #[test]
    fn psnr_identical_is_infinite() {
        let a = gradient();
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
    }

    #[test]
    fn psnr_checkerboard_inverse_is_zero() {
        let a = RasterImage::from_fn(8, 8, |x, y| [((x + y) % 2) as f64; 3]);
        let b = a.map(|v| 1.0 - v);
        assert_eq!(psnr(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn psnr_uniform_offset_closed_form() {
        let a = RasterImage::filled(16, 16, [0.25, 0.5, 0.125]);
        let d = 16.0 / 255.0;
        let b = a.map(|v| v + d);
        // MSE = d², so PSNR = 20·log10(255/16).
        let expected = 20.0 * (255.0f64 / 16.0).log10();
        assert!((psnr(&a, &b).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn psnr_symmetric_nrmse_not() {
        let a = gradient();
        let b = a.map(|v| 0.5 * v + 0.1);
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        assert!((nrmse(&a, &b).unwrap() - nrmse(&b, &a).unwrap()).abs() > 1e-3);
    }

    #[test]
    fn nrmse_examples() {
        let b = RasterImage::from_fn(11, 1, |x, _| [x as f64 / 10.0 * 0.9; 3]);
        let b = RasterImage::from_fn(11, 2, |x, y| if y == 0 { b.get(x, 0) } else { [0.0, 0.9, 0.45] });
        let b_full = b.map(|v| v / 0.9);
        let a = b_full.map(|v| v * 0.9 + 0.1);
        let b_ref = b_full.map(|v| v * 0.9);
        // a = reference + 0.1 everywhere, reference range 0.9.
        assert!((nrmse(&a, &b_ref).unwrap() - 0.1 / 0.9).abs() < 1e-12);
        assert_eq!(nrmse(&b_ref, &b_ref).unwrap(), 0.0);
        assert!(nrmse(&a, &RasterImage::filled(11, 2, [0.3; 3])).is_err());
        assert!(nrmse(&a, &RasterImage::new(3, 3)).is_err());
        assert!(psnr(&a, &RasterImage::new(3, 3)).is_err());
    }

    #[test]
    fn report_serializes_infinity() {
        let rows = vec![
            MetricRow { id: "p/front".into(), direction: "front".into(), psnr: f64::INFINITY, nrmse: 0.0 },
            MetricRow { id: "p/back".into(), direction: "back".into(), psnr: 30.0, nrmse: 0.02 },
        ];
        let report = MetricReport::from_rows(rows, vec![], vec![]);
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["rows"][0]["psnr"], "inf");
        assert_eq!(json["overall"]["mean_psnr"], "inf");
        assert_eq!(json["per_direction"]["back"]["mean_psnr"], 30.0);
        assert!(report.to_csv().contains("p/front,front,inf,0.00000000"));
    }
}
