//! Alignment of generated content with the original and gradient-domain
//! fusion.
//!
//! A [`Composite`] carries three aligned layers: the `canvas` (generated
//! content with the original pasted over it), the `guidance` (the generated
//! content alone, whose gradients are imported) and a [`BlendMask`]. Poisson
//! blending solves, per channel and for every `Fill` pixel `p`,
//!
//! ```text
//! Σ_{q ∈ N4(p) ∩ system} (f_p − f_q) = Σ_{q ∈ N4(p) ∩ system} (g_p − g_q)
//! ```
//!
//! with `f_q` fixed to the canvas on `Keep` pixels. Neighbors that are
//! `Outside` or off the image are dropped from both sides.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::foveation::FoveatedLayout;
use crate::projection::{insert_view, Coverage, EquirectPanorama, ViewSpec};
use crate::raster::RasterImage;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    /// Original pixel, held fixed.
    Keep,
    /// Unknown solved for.
    Fill,
    /// Not part of the system.
    Outside,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlendMask {
    width: usize,
    height: usize,
    labels: Vec<Label>,
}

impl BlendMask {
    pub fn new(width: usize, height: usize, label: Label) -> Self {
        Self { width, height, labels: vec![label; width * height] }
    }

    pub fn from_labels(width: usize, height: usize, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::Dimension(format!("{} labels for a {width}x{height} mask", labels.len())));
        }
        Ok(Self { width, height, labels })
    }

    /// `Keep` where `keep` is set, `Fill` elsewhere.
    pub fn from_keep(width: usize, height: usize, keep: &[bool]) -> Result<Self> {
        Self::from_labels(width, height, keep.iter().map(|&k| if k { Label::Keep } else { Label::Fill }).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Label {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, label: Label) {
        self.labels[y * self.width + x] = label;
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn keep_fraction(&self) -> f64 {
        self.count(Label::Keep) as f64 / self.labels.len() as f64
    }

    /// 4-neighbors of pixel index `i`, in left, right, up, down order.
    #[inline]
    fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> {
        self.neighbor_slots(i).into_iter().flatten()
    }

    #[inline]
    fn neighbor_slots(&self, i: usize) -> [Option<usize>; 4] {
        let (w, h) = (self.width, self.height);
        let (x, y) = (i % w, i / w);
        [
            (x > 0).then(|| i - 1),
            (x + 1 < w).then(|| i + 1),
            (y > 0).then(|| i - w),
            (y + 1 < h).then(|| i + w),
        ]
    }

    /// `Fill` components with no `Keep` pixel reachable through `Fill`/`Keep`
    /// neighbors. These have no Dirichlet data; the solver leaves them equal
    /// to the guidance, which satisfies their equations exactly.
    pub fn pure_neumann(&self) -> Vec<bool> {
        let n = self.labels.len();
        let mut anchored = vec![false; n];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for i in 0..n {
            if self.labels[i] == Label::Fill && self.neighbors(i).any(|q| self.labels[q] == Label::Keep) {
                anchored[i] = true;
                queue.push_back(i);
            }
        }
        while let Some(i) = queue.pop_front() {
            for q in self.neighbors(i) {
                if self.labels[q] == Label::Fill && !anchored[q] {
                    anchored[q] = true;
                    queue.push_back(q);
                }
            }
        }
        (0..n).map(|i| self.labels[i] == Label::Fill && !anchored[i]).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMethod {
    Overlay,
    Poisson,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preconditioner {
    None,
    Jacobi,
    /// Modified incomplete Cholesky, zero fill-in.
    #[default]
    Mic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub method: FusionMethod,
    /// Stop when `‖r‖ / ‖b‖` falls below this.
    pub cg_tolerance: f64,
    /// `None` means `10·√n + 1000` for `n` unknowns.
    pub cg_max_iters: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { method: FusionMethod::Poisson, cg_tolerance: 1e-6, cg_max_iters: None, preconditioner: Preconditioner::Mic }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cg_tolerance > 0.0 && self.cg_tolerance < 1.0) {
            return Err(Error::Domain(format!("CG tolerance must lie in (0, 1), got {}", self.cg_tolerance)));
        }
        if self.cg_max_iters == Some(0) {
            return Err(Error::Domain("CG iteration cap must be at least 1".into()));
        }
        Ok(())
    }

    pub fn max_iters_for(&self, unknowns: usize) -> usize {
        self.cg_max_iters.unwrap_or_else(|| (10.0 * (unknowns as f64).sqrt()) as usize + 1000)
    }
}

/// Canvas, guidance and mask on a common pixel grid.
#[derive(Clone, Debug)]
pub struct Composite {
    pub canvas: RasterImage,
    pub guidance: RasterImage,
    pub mask: BlendMask,
}

impl Composite {
    pub fn new(canvas: RasterImage, guidance: RasterImage, mask: BlendMask) -> Result<Self> {
        if canvas.dims() != guidance.dims() || canvas.dims() != (mask.width, mask.height) {
            return Err(Error::Dimension(format!(
                "canvas {:?}, guidance {:?} and mask {:?} disagree",
                canvas.dims(),
                guidance.dims(),
                (mask.width, mask.height)
            )));
        }
        Ok(Self { canvas, guidance, mask })
    }

    /// Single-layer composite: the canvas is its own guidance.
    pub fn from_canvas(canvas: RasterImage, mask: BlendMask) -> Result<Self> {
        Self::new(canvas.clone(), canvas, mask)
    }
}

/// Places the original at the center of the upsampled near-periphery output.
///
/// The canvas side is the original side divided by the layout's linear
/// ratio (2× for the default layout), so the original keeps its native scale.
pub fn align_near(original: &RasterImage, generated: &RasterImage, layout: &FoveatedLayout) -> Result<Composite> {
    let ratio = layout.near_linear_ratio();
    let (w, h) = original.dims();
    let cw = (w as f64 / ratio).round() as usize;
    let ch = (h as f64 / ratio).round() as usize;
    align_near_on(original, generated, cw, ch)
}

/// Like [`align_near`] with an explicit canvas size.
pub fn align_near_on(original: &RasterImage, generated: &RasterImage, width: usize, height: usize) -> Result<Composite> {
    let (w, h) = original.dims();
    if w > width || h > height {
        return Err(Error::Geometry(format!("original {w}x{h} exceeds canvas {width}x{height}")));
    }
    let guidance = generated.resize(width, height);
    let mut canvas = guidance.clone();
    let (x0, y0) = ((width - w) / 2, (height - h) / 2);
    canvas.paste(original, x0, y0)?;
    let mut mask = BlendMask::new(width, height, Label::Fill);
    for y in y0..y0 + h {
        for x in x0..x0 + w {
            mask.set(x, y, Label::Keep);
        }
    }
    Composite::new(canvas, guidance, mask)
}

/// Inserts the fused near-periphery image into the upsampled 180°
/// equirectangular output. `Keep` covers exactly the insertion footprint.
pub fn align_mid(near_fused: &RasterImage, generated: &RasterImage, layout: &FoveatedLayout, height: usize) -> Result<Composite> {
    let guidance = EquirectPanorama::new(generated.resize(height, height), Coverage::Hemisphere)?;
    let view = ViewSpec::with_aspect(0.0, 0.0, layout.near_fov, near_fused.width(), near_fused.height())?;
    if view.fov_v >= layout.mid_fov {
        return Err(Error::Geometry(format!("near image ({:.2}° tall) exceeds the mid canvas", view.fov_v)));
    }
    let (canvas, keep) = insert_view(&guidance, near_fused, &view)?;
    let mask = BlendMask::from_keep(height, height, &keep)?;
    Composite::new(canvas.into_image(), guidance.into_image(), mask)
}

/// The no-blend arm: the canvas as-is.
pub fn overlay(composite: &Composite) -> RasterImage {
    composite.canvas.clone()
}

pub fn fuse(composite: &Composite, config: &FusionConfig) -> Result<RasterImage> {
    match config.method {
        FusionMethod::Overlay => Ok(overlay(composite)),
        FusionMethod::Poisson => poisson_blend(composite, config),
    }
}

/// Poisson-blended composite. `Keep` and `Outside` pixels are returned
/// bit-identical to the canvas; solved values are clamped into `[0, 1]`.
pub fn poisson_blend(composite: &Composite, config: &FusionConfig) -> Result<RasterImage> {
    let planes = solve_planes(composite, config)?;
    let (w, h) = composite.canvas.dims();
    let mut out = composite.canvas.clone();
    for (i, &label) in composite.mask.labels.iter().enumerate() {
        if label == Label::Fill {
            let v = [planes[0][i], planes[1][i], planes[2][i]].map(|v| v.clamp(0.0, 1.0));
            out.set(i % w, i / w, v);
        }
    }
    debug_assert_eq!(out.dims(), (w, h));
    Ok(out)
}

/// Unclamped per-channel solution planes (row-major, full image size).
pub fn solve_planes(composite: &Composite, config: &FusionConfig) -> Result<[Vec<f64>; 3]> {
    config.validate()?;
    let system = PoissonSystem::build(&composite.mask);
    let planes: Vec<Result<Vec<f64>>> = (0..3usize)
        .into_par_iter()
        .map(|c| {
            let canvas = composite.canvas.plane(c);
            let guidance = composite.guidance.plane(c);
            system.solve_channel(&canvas, &guidance, config).map(|s| s.plane)
        })
        .collect();
    let mut it = planes.into_iter();
    Ok([it.next().unwrap()?, it.next().unwrap()?, it.next().unwrap()?])
}

/// Sparse 5-point system over the anchored `Fill` pixels.
pub struct PoissonSystem<'m> {
    mask: &'m BlendMask,
    /// Pixel index of each unknown.
    pixels: Vec<usize>,
    /// Unknown index of the left, right, up and down neighbors; absent
    /// neighbors point one past the last unknown.
    links: Vec<[u32; 4]>,
    diag: Vec<f64>,
    floating: Vec<bool>,
}

const NONE: u32 = u32::MAX;

pub struct ChannelSolution {
    pub plane: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl<'m> PoissonSystem<'m> {
    pub fn build(mask: &'m BlendMask) -> Self {
        let floating = mask.pure_neumann();
        let n = mask.labels.len();
        let mut index = vec![NONE; n];
        let mut pixels = Vec::new();
        for i in 0..n {
            if mask.labels[i] == Label::Fill && !floating[i] {
                index[i] = pixels.len() as u32;
                pixels.push(i);
            }
        }
        let mut links = Vec::with_capacity(pixels.len());
        let mut diag = Vec::with_capacity(pixels.len());
        for &p in &pixels {
            let mut link = [NONE; 4];
            let mut d = 0.0;
            for (k, q) in mask.neighbor_slots(p).into_iter().enumerate() {
                let Some(q) = q else { continue };
                match mask.labels[q] {
                    Label::Outside => {}
                    Label::Keep => d += 1.0,
                    Label::Fill => {
                        d += 1.0;
                        link[k] = index[q];
                    }
                }
            }
            links.push(link);
            diag.push(d);
        }
        let pad = pixels.len() as u32;
        for link in &mut links {
            for j in link.iter_mut().filter(|j| **j == NONE) {
                *j = pad;
            }
        }
        Self { mask, pixels, links, diag, floating }
    }

    pub fn unknowns(&self) -> usize {
        self.pixels.len()
    }

    fn rhs(&self, canvas: &[f64], guidance: &[f64]) -> Vec<f64> {
        self.pixels
            .iter()
            .map(|&p| {
                let mut b = 0.0;
                for q in self.mask.neighbors(p) {
                    match self.mask.labels[q] {
                        Label::Outside => {}
                        Label::Keep => b += guidance[p] - guidance[q] + canvas[q],
                        Label::Fill => b += guidance[p] - guidance[q],
                    }
                }
                b
            })
            .collect()
    }

    /// `out = A·x`; `x` carries one trailing zero that absent links point at.
    #[inline]
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (k, (l, &d)) in self.links.iter().zip(&self.diag).enumerate() {
            out[k] = d * x[k] - x[l[0] as usize] - x[l[1] as usize] - x[l[2] as usize] - x[l[3] as usize];
        }
    }

    /// Diagonal of the MIC(0) factor, stored inverted and padded with a zero.
    fn mic_factor(&self) -> Vec<f64> {
        const TAU: f64 = 0.97;
        const SIGMA: f64 = 0.25;
        let n = self.unknowns();
        let pad = n as u32;
        let mut pc = vec![0.0; n + 1];
        for k in 0..n {
            let [left, _, up, _] = self.links[k];
            let (pl, pu) = (pc[left as usize], pc[up as usize]);
            let left_down = left != pad && self.links[left as usize][3] != pad;
            let up_right = up != pad && self.links[up as usize][1] != pad;
            let d = self.diag[k];
            let mut e = d - pl * pl - pu * pu;
            e -= TAU * (if left_down { pl * pl } else { 0.0 } + if up_right { pu * pu } else { 0.0 });
            if e < SIGMA * d {
                e = d;
            }
            pc[k] = 1.0 / e.sqrt();
        }
        pc
    }

    /// `z = (L Lᵀ)⁻¹ r` for the MIC(0) factor `pc`; `z` has the padding slot.
    fn mic_apply(&self, pc: &[f64], r: &[f64], z: &mut [f64]) {
        let n = self.unknowns();
        z[n] = 0.0;
        for k in 0..n {
            let [left, _, up, _] = self.links[k];
            let (l, u) = (left as usize, up as usize);
            z[k] = (r[k] + pc[l] * z[l] + pc[u] * z[u]) * pc[k];
        }
        for k in (0..n).rev() {
            let [_, right, _, down] = self.links[k];
            z[k] = (z[k] + pc[k] * (z[right as usize] + z[down as usize])) * pc[k];
        }
    }

    /// Solves one channel by preconditioned conjugate gradient, starting from
    /// the guidance values.
    pub fn solve_channel(&self, canvas: &[f64], guidance: &[f64], config: &FusionConfig) -> Result<ChannelSolution> {
        let max_iters = config.max_iters_for(self.unknowns());
        let (solution, converged) = self.cg(canvas, guidance, config.cg_tolerance, max_iters, config.preconditioner);
        if !converged {
            return Err(Error::Solver { iterations: solution.iterations, residual: solution.residual });
        }
        Ok(solution)
    }

    fn cg(
        &self,
        canvas: &[f64],
        guidance: &[f64],
        tolerance: f64,
        max_iters: usize,
        preconditioner: Preconditioner,
    ) -> (ChannelSolution, bool) {
        let n = self.unknowns();
        let mut plane = canvas.to_vec();
        for (i, &f) in self.floating.iter().enumerate() {
            if f {
                plane[i] = guidance[i];
            }
        }
        if n == 0 {
            return (ChannelSolution { plane, iterations: 0, residual: 0.0 }, true);
        }

        let b = self.rhs(canvas, guidance);
        let b_norm = dot(&b, &b).sqrt();
        let scale = if b_norm > 0.0 { b_norm } else { 1.0 };
        let mut x: Vec<f64> = self.pixels.iter().map(|&p| guidance[p]).chain([0.0]).collect();
        let mut r = vec![0.0; n];
        self.apply(&x, &mut r);
        for (ri, bi) in r.iter_mut().zip(&b) {
            *ri = bi - *ri;
        }
        let mut z = vec![0.0; n + 1];
        let mic = match preconditioner {
            Preconditioner::Mic => Some(self.mic_factor()),
            _ => None,
        };
        let precondition = |r: &[f64], z: &mut [f64]| match (&mic, preconditioner) {
            (Some(pc), _) => self.mic_apply(pc, r, z),
            (None, Preconditioner::Jacobi) => {
                for k in 0..n {
                    z[k] = r[k] / self.diag[k];
                }
            }
            _ => z[..n].copy_from_slice(r),
        };
        precondition(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z[..n]);
        let mut ap = vec![0.0; n];
        let mut residual = dot(&r, &r).sqrt() / scale;
        let mut iterations = 0;
        while residual > tolerance && iterations < max_iters {
            let mut pap = 0.0;
            for (k, (l, &d)) in self.links.iter().zip(&self.diag).enumerate() {
                let v = d * p[k] - p[l[0] as usize] - p[l[1] as usize] - p[l[2] as usize] - p[l[3] as usize];
                ap[k] = v;
                pap += p[k] * v;
            }
            let alpha = rz / pap;
            let mut rr = 0.0;
            for k in 0..n {
                x[k] += alpha * p[k];
                let rk = r[k] - alpha * ap[k];
                r[k] = rk;
                rr += rk * rk;
            }
            precondition(&r, &mut z);
            let rz_next = dot(&r, &z[..n]);
            let beta = rz_next / rz;
            rz = rz_next;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
            residual = rr.sqrt() / scale;
            iterations += 1;
        }

        for (k, &pix) in self.pixels.iter().enumerate() {
            plane[pix] = x[k];
        }
        (ChannelSolution { plane, iterations, residual }, residual <= tolerance)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean absolute difference across all 4-neighbor (`Keep`, `Fill`) pairs,
/// averaged over channels.
pub fn seam_discontinuity(img: &RasterImage, mask: &BlendMask) -> Result<f64> {
    if img.dims() != (mask.width, mask.height) {
        return Err(Error::Dimension("image and mask sizes differ".into()));
    }
    let w = mask.width;
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..mask.labels.len() {
        if mask.labels[i] != Label::Keep {
            continue;
        }
        let a = img.get(i % w, i / w);
        for q in mask.neighbors(i) {
            if mask.labels[q] == Label::Fill {
                let b = img.get(q % w, q / w);
                total += (0..3).map(|c| (a[c] - b[c]).abs()).sum::<f64>() / 3.0;
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        return Err(Error::Domain("mask has no Keep/Fill boundary".into()));
    }
    Ok(total / pairs as f64)
}
