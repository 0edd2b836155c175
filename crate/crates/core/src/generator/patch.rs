//! Coarse-to-fine patch-based extrapolation.
//!
//! A pyramid is built over the image and its known-region mask. At the
//! coarsest level unknown pixels are seeded by onion-peel diffusion from the
//! boundary. Every level then alternates randomized correspondence search
//! (propagation plus shrinking-radius random search) with patch voting, and
//! the correspondence field is upsampled to seed the next finer level.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::RasterImage;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatchParams {
    /// Odd patch side, at least 3.
    pub patch_size: usize,
    pub pyramid_levels: usize,
    pub iterations_per_level: usize,
    /// Maximum random-search radius in pixels; `None` searches the whole image.
    pub search_region: Option<usize>,
}

impl Default for PatchParams {
    fn default() -> Self {
        Self { patch_size: 7, pyramid_levels: 4, iterations_per_level: 5, search_region: None }
    }
}

impl PatchParams {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size < 3 || self.patch_size % 2 == 0 {
            return Err(Error::Domain(format!("patch size must be odd and at least 3, got {}", self.patch_size)));
        }
        if self.pyramid_levels == 0 {
            return Err(Error::Domain("need at least one pyramid level".into()));
        }
        if self.search_region == Some(0) {
            return Err(Error::Domain("search region must be positive".into()));
        }
        Ok(())
    }
}

/// One pyramid level: planar RGB estimates plus the known mask.
#[derive(Clone)]
struct Level {
    w: usize,
    h: usize,
    px: Vec<[f64; 3]>,
    known: Vec<bool>,
}

impl Level {
    fn downsample(&self) -> Level {
        let (w, h) = ((self.w + 1) / 2, (self.h + 1) / 2);
        let mut px = vec![[0.0; 3]; w * h];
        let mut known = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut all = [0.0; 3];
                let mut kn = [0.0; 3];
                let (mut n_all, mut n_known) = (0.0, 0.0);
                for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    let (sx, sy) = (2 * x + dx, 2 * y + dy);
                    if sx >= self.w || sy >= self.h {
                        continue;
                    }
                    let i = sy * self.w + sx;
                    for c in 0..3 {
                        all[c] += self.px[i][c];
                    }
                    n_all += 1.0;
                    if self.known[i] {
                        for c in 0..3 {
                            kn[c] += self.px[i][c];
                        }
                        n_known += 1.0;
                    }
                }
                let i = y * w + x;
                known[i] = n_known == n_all;
                px[i] = if n_known > 0.0 { kn.map(|v| v / n_known) } else { all.map(|v| v / n_all) };
            }
        }
        Level { w, h, px, known }
    }

    /// Seeds unknown pixels layer by layer with the mean of their already
    /// filled 8-neighbors.
    fn diffuse_fill(&mut self) {
        let mut filled = self.known.clone();
        loop {
            let mut updates = Vec::new();
            for y in 0..self.h {
                for x in 0..self.w {
                    let i = y * self.w + x;
                    if filled[i] {
                        continue;
                    }
                    let mut acc = [0.0; 3];
                    let mut n = 0.0;
                    for dy in -1isize..=1 {
                        for dx in -1isize..=1 {
                            let (nx, ny) = (x as isize + dx, y as isize + dy);
                            if nx < 0 || ny < 0 || nx >= self.w as isize || ny >= self.h as isize {
                                continue;
                            }
                            let j = ny as usize * self.w + nx as usize;
                            if filled[j] {
                                for c in 0..3 {
                                    acc[c] += self.px[j][c];
                                }
                                n += 1.0;
                            }
                        }
                    }
                    if n > 0.0 {
                        updates.push((i, acc.map(|v| v / n)));
                    }
                }
            }
            if updates.is_empty() {
                break;
            }
            for (i, v) in updates {
                self.px[i] = v;
                filled[i] = true;
            }
        }
    }
}

/// Correspondence search state for one level.
struct Search<'a> {
    level: &'a Level,
    radius: isize,
    /// Centers whose full window lies inside the image and is known.
    is_source: Vec<bool>,
    sources: Vec<usize>,
}

impl<'a> Search<'a> {
    fn new(level: &'a Level, radius: usize) -> Self {
        let (w, h) = (level.w, level.h);
        let r = radius as isize;
        let full_window = |i: usize| {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            x >= r && y >= r && x + r < w as isize && y + r < h as isize && {
                (-r..=r).all(|dy| (-r..=r).all(|dx| level.known[((y + dy) as usize) * w + (x + dx) as usize]))
            }
        };
        let mut is_source: Vec<bool> = (0..w * h).map(full_window).collect();
        if !is_source.iter().any(|&s| s) {
            // Known region thinner than a patch: fall back to any known center.
            is_source = level.known.clone();
        }
        let sources = (0..w * h).filter(|&i| is_source[i]).collect();
        Self { level, radius: r, is_source, sources }
    }

    /// Mean squared color difference over pixels that are inside both
    /// windows and known on the source side.
    fn distance(&self, target: usize, source: usize) -> f64 {
        let (w, h) = (self.level.w as isize, self.level.h as isize);
        let (tx, ty) = ((target as isize) % w, (target as isize) / w);
        let (sx, sy) = ((source as isize) % w, (source as isize) / w);
        let r = self.radius;
        let mut sum = 0.0;
        let mut n = 0usize;
        for dy in -r..=r {
            let (ty2, sy2) = (ty + dy, sy + dy);
            if ty2 < 0 || ty2 >= h || sy2 < 0 || sy2 >= h {
                continue;
            }
            for dx in -r..=r {
                let (tx2, sx2) = (tx + dx, sx + dx);
                if tx2 < 0 || tx2 >= w || sx2 < 0 || sx2 >= w {
                    continue;
                }
                let s = (sy2 * w + sx2) as usize;
                if !self.level.known[s] {
                    continue;
                }
                let t = self.level.px[(ty2 * w + tx2) as usize];
                let q = self.level.px[s];
                sum += (t[0] - q[0]).powi(2) + (t[1] - q[1]).powi(2) + (t[2] - q[2]).powi(2);
                n += 1;
            }
        }
        if n == 0 {
            f64::INFINITY
        } else {
            sum / n as f64
        }
    }

    fn random_source(&self, rng: &mut ChaCha8Rng) -> usize {
        self.sources[rng.random_range(0..self.sources.len())]
    }
}

/// Fills the pixels where `known` is false from patches of the known region.
/// Deterministic for a given `seed`.
pub fn patch_extrapolate(input: &RasterImage, known: &[bool], params: &PatchParams, seed: u64) -> Result<RasterImage> {
    params.validate()?;
    let (w, h) = input.dims();
    if known.len() != w * h {
        return Err(Error::Dimension(format!("mask has {} entries for a {w}x{h} image", known.len())));
    }
    if !known.iter().any(|&k| k) {
        return Err(Error::Input("known region is empty".into()));
    }
    if known.iter().all(|&k| k) {
        return Ok(input.clone());
    }

    let radius = params.patch_size / 2;
    let mut levels = vec![Level { w, h, px: input.pixels().collect(), known: known.to_vec() }];
    while levels.len() < params.pyramid_levels {
        let next = levels.last().unwrap().downsample();
        let unknown = next.known.iter().any(|&k| !k);
        if !next.known.iter().any(|&k| k) || !unknown || next.w.min(next.h) <= params.patch_size {
            break;
        }
        levels.push(next);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nnf: Vec<usize> = Vec::new();
    let coarsest = levels.len() - 1;
    for li in (0..=coarsest).rev() {
        if li == coarsest {
            levels[li].diffuse_fill();
        } else {
            let (coarse, fine) = {
                let (lo, hi) = levels.split_at_mut(li + 1);
                (&hi[0], &mut lo[li])
            };
            upsample_estimates(coarse, fine);
        }
        let level = levels[li].clone();
        let search = Search::new(&level, radius);
        nnf = if li == coarsest {
            (0..level.w * level.h).map(|_| search.random_source(&mut rng)).collect()
        } else {
            upsample_nnf(&levels[li + 1], &nnf, &search, &mut rng)
        };
        drop(search);

        let mut current = level;
        for iter in 0..params.iterations_per_level {
            let search = Search::new(&current, radius);
            correspondence_pass(&search, &mut nnf, iter % 2 == 1, params.search_region, &mut rng);
            let voted = vote(&current, &nnf, radius);
            current.px = voted;
        }
        levels[li] = current;
    }

    let finest = &levels[0];
    let data = finest.px.iter().flat_map(|p| p.map(|v| v.clamp(0.0, 1.0))).collect();
    RasterImage::from_vec(w, h, data)
}

fn upsample_estimates(coarse: &Level, fine: &mut Level) {
    for y in 0..fine.h {
        for x in 0..fine.w {
            let i = y * fine.w + x;
            if fine.known[i] {
                continue;
            }
            let cx = ((x as f64 + 0.5) / 2.0 - 0.5).clamp(0.0, (coarse.w - 1) as f64);
            let cy = ((y as f64 + 0.5) / 2.0 - 0.5).clamp(0.0, (coarse.h - 1) as f64);
            let (x0, y0) = (cx.floor() as usize, cy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(coarse.w - 1), (y0 + 1).min(coarse.h - 1));
            let (fx, fy) = (cx - x0 as f64, cy - y0 as f64);
            let at = |xx: usize, yy: usize| coarse.px[yy * coarse.w + xx];
            let (a, b, c, d) = (at(x0, y0), at(x1, y0), at(x0, y1), at(x1, y1));
            fine.px[i] = std::array::from_fn(|k| {
                let top = a[k] + (b[k] - a[k]) * fx;
                let bottom = c[k] + (d[k] - c[k]) * fx;
                top + (bottom - top) * fy
            });
        }
    }
}

fn upsample_nnf(coarse: &Level, coarse_nnf: &[usize], search: &Search, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let fine = search.level;
    (0..fine.w * fine.h)
        .map(|i| {
            let (x, y) = (i % fine.w, i / fine.w);
            let (cx, cy) = ((x / 2).min(coarse.w - 1), (y / 2).min(coarse.h - 1));
            let m = coarse_nnf[cy * coarse.w + cx];
            let (mx, my) = (m % coarse.w, m / coarse.w);
            let (sx, sy) = (2 * mx + (x - 2 * cx), 2 * my + (y - 2 * cy));
            if sx < fine.w && sy < fine.h && search.is_source[sy * fine.w + sx] {
                sy * fine.w + sx
            } else {
                search.random_source(rng)
            }
        })
        .collect()
}

/// One sweep of propagation and random search over all unknown pixels.
fn correspondence_pass(search: &Search, nnf: &mut [usize], reverse: bool, max_radius: Option<usize>, rng: &mut ChaCha8Rng) {
    let level = search.level;
    let (w, h) = (level.w as isize, level.h as isize);
    let targets: Vec<usize> = (0..level.w * level.h).filter(|&i| !level.known[i]).collect();
    let mut cost: Vec<f64> = vec![f64::INFINITY; nnf.len()];
    for &t in &targets {
        cost[t] = search.distance(t, nnf[t]);
    }
    let step: isize = if reverse { 1 } else { -1 };
    let start_radius = max_radius.map_or(w.max(h), |r| r as isize);

    let order: Box<dyn Iterator<Item = &usize>> = if reverse { Box::new(targets.iter().rev()) } else { Box::new(targets.iter()) };
    for &t in order {
        let (tx, ty) = ((t as isize) % w, (t as isize) / w);
        let mut best = nnf[t];
        let mut best_cost = cost[t];

        // Neighbor already visited in this sweep, shifted back by one.
        for (nx, ny) in [(tx + step, ty), (tx, ty + step)] {
            if nx < 0 || ny < 0 || nx >= w || ny >= h {
                continue;
            }
            let n = (ny * w + nx) as usize;
            if level.known[n] {
                continue;
            }
            let m = nnf[n] as isize;
            let (sx, sy) = (m % w - (nx - tx), m / w - (ny - ty));
            if sx < 0 || sy < 0 || sx >= w || sy >= h {
                continue;
            }
            let cand = (sy * w + sx) as usize;
            if cand != best && search.is_source[cand] {
                let c = search.distance(t, cand);
                if c < best_cost {
                    best = cand;
                    best_cost = c;
                }
            }
        }

        let mut radius = start_radius;
        while radius >= 1 {
            let (bx, by) = ((best as isize) % w, (best as isize) / w);
            let sx = (bx + rng.random_range(-(radius as i64)..=radius as i64) as isize).clamp(0, w - 1);
            let sy = (by + rng.random_range(-(radius as i64)..=radius as i64) as isize).clamp(0, h - 1);
            let cand = (sy * w + sx) as usize;
            if cand != best && search.is_source[cand] {
                let c = search.distance(t, cand);
                if c < best_cost {
                    best = cand;
                    best_cost = c;
                }
            }
            radius /= 2;
        }
        nnf[t] = best;
        cost[t] = best_cost;
    }
}

/// Each unknown pixel becomes the mean of the source pixels that the patches
/// covering it map it to.
fn vote(level: &Level, nnf: &[usize], radius: usize) -> Vec<[f64; 3]> {
    let (w, h) = (level.w as isize, level.h as isize);
    let r = radius as isize;
    let mut out = level.px.clone();
    for i in 0..level.w * level.h {
        if level.known[i] {
            continue;
        }
        let (x, y) = ((i as isize) % w, (i as isize) / w);
        let mut acc = [0.0; 3];
        let mut n = 0.0;
        for dy in -r..=r {
            for dx in -r..=r {
                // Patch centered at (x - dx, y - dy) covers this pixel at offset (dx, dy).
                let (cx, cy) = (x - dx, y - dy);
                if cx < 0 || cy < 0 || cx >= w || cy >= h {
                    continue;
                }
                let c = (cy * w + cx) as usize;
                if level.known[c] {
                    continue;
                }
                let m = nnf[c] as isize;
                let (sx, sy) = (m % w + dx, m / w + dy);
                if sx < 0 || sy < 0 || sx >= w || sy >= h {
                    continue;
                }
                let s = (sy * w + sx) as usize;
                if !level.known[s] {
                    continue;
                }
                for k in 0..3 {
                    acc[k] += level.px[s][k];
                }
                n += 1.0;
            }
        }
        if n > 0.0 {
            out[i] = acc.map(|v| v / n);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn center_mask(w: usize, h: usize, x0: usize, y0: usize, kw: usize, kh: usize) -> Vec<bool> {
        (0..w * h).map(|i| (x0..x0 + kw).contains(&(i % w)) && (y0..y0 + kh).contains(&(i / w))).collect()
    }

    #[test]
    fn params_validation() {
        assert!(PatchParams { patch_size: 4, ..Default::default() }.validate().is_err());
        assert!(PatchParams { patch_size: 1, ..Default::default() }.validate().is_err());
        assert!(PatchParams { pyramid_levels: 0, ..Default::default() }.validate().is_err());
        assert!(PatchParams::default().validate().is_ok());
    }

    #[test]
    fn empty_known_region_is_an_error() {
        let img = RasterImage::new(16, 16);
        assert!(matches!(
            patch_extrapolate(&img, &vec![false; 256], &PatchParams::default(), 0),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn constant_known_region_gives_constant_completion() {
        let mut img = RasterImage::new(48, 48);
        img.paste(&RasterImage::filled(24, 24, [0.5, 0.25, 0.75]), 12, 12).unwrap();
        let known = center_mask(48, 48, 12, 12, 24, 24);
        let out = patch_extrapolate(&img, &known, &PatchParams::default(), 3).unwrap();
        for p in out.pixels() {
            assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.25).abs() < 1e-12 && (p[2] - 0.75).abs() < 1e-12);
        }
    }

    #[test]
    fn two_tone_stays_within_known_values() {
        let mut img = RasterImage::new(40, 40);
        let tile = RasterImage::from_fn(20, 20, |x, y| if (x / 3 + y / 5) % 2 == 0 { [0.2; 3] } else { [0.9; 3] });
        img.paste(&tile, 10, 10).unwrap();
        let known = center_mask(40, 40, 10, 10, 20, 20);
        let out = patch_extrapolate(&img, &known, &PatchParams::default(), 11).unwrap();
        for p in out.pixels() {
            assert!(p[0] >= 0.2 - 1e-12 && p[0] <= 0.9 + 1e-12);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let img = RasterImage::from_fn(40, 40, |x, y| [((x * 13 + y * 7) % 17) as f64 / 16.0, 0.5, (y % 5) as f64 / 4.0]);
        let known = center_mask(40, 40, 10, 10, 20, 20);
        let a = patch_extrapolate(&img, &known, &PatchParams::default(), 42).unwrap();
        let b = patch_extrapolate(&img, &known, &PatchParams::default(), 42).unwrap();
        assert_eq!(a, b);
        for (i, &k) in known.iter().enumerate() {
            if k {
                assert_eq!(&a.data()[3 * i..3 * i + 3], &img.data()[3 * i..3 * i + 3]);
            }
        }
    }
}
