//! Image quilting: raster-order placement of exemplar patches stitched
//! along minimum-error boundary cuts, and the wall-texture fallback.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, ClassId, LabelMap, RasterImage};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuiltParams {
    pub patch_n: usize,
    pub overlap: usize,
    /// Candidates within `(1 + tolerance) · min SSD` form the random pool.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for QuiltParams {
    fn default() -> Self {
        Self {
            patch_n: 36,
            overlap: 5,
            tolerance: 0.1,
            seed: 0,
        }
    }
}

impl QuiltParams {
    pub fn validate(&self) -> Result<()> {
        if self.patch_n == 0 {
            return Err(Error::InvalidParameter("patch size must be > 0".into()));
        }
        if self.overlap >= self.patch_n {
            return Err(Error::InvalidParameter(format!(
                "overlap {} must be smaller than patch size {}",
                self.overlap, self.patch_n
            )));
        }
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(Error::InvalidParameter("tolerance must be > 0".into()));
        }
        Ok(())
    }

    pub fn step(&self) -> usize {
        self.patch_n - self.overlap
    }
}

/// Axis-aligned pixel rectangle, parsed from `x,y,w,h`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, width: usize, height: usize) -> Self {
        Self { x, y, width, height }
    }

    pub fn fits_in(&self, width: usize, height: usize) -> bool {
        self.width > 0 && self.height > 0 && self.x + self.width <= width && self.y + self.height <= height
    }
}

impl FromStr for Rect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<_> = s.split(',').map(|p| p.trim().parse::<usize>()).collect();
        match parts.as_slice() {
            [Ok(x), Ok(y), Ok(w), Ok(h)] => Ok(Rect::new(*x, *y, *w, *h)),
            _ => Err(Error::InvalidInput(format!("expected x,y,w,h, got {s:?}"))),
        }
    }
}

/// Every `n × n` window of a source at unit stride, id in raster order of
/// the window origin.
#[derive(Clone, Debug)]
pub struct PatchSet<T> {
    source: RasterImage<T>,
    n: usize,
    cols: usize,
    rows: usize,
}

pub fn sample_patches<T: Scalar>(source: &RasterImage<T>, n: usize) -> Result<PatchSet<T>> {
    if n == 0 || source.width() < n || source.height() < n {
        return Err(Error::InvalidParameter(format!(
            "{}x{} source cannot hold a {n}x{n} patch",
            source.width(),
            source.height()
        )));
    }
    Ok(PatchSet {
        source: source.clone(),
        n,
        cols: source.width() - n + 1,
        rows: source.height() - n + 1,
    })
}

impl<T: Scalar> PatchSet<T> {
    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn patch_size(&self) -> usize {
        self.n
    }

    pub fn source(&self) -> &RasterImage<T> {
        &self.source
    }

    pub fn origin(&self, id: usize) -> (usize, usize) {
        (id % self.cols, id / self.cols)
    }

    pub fn patch(&self, id: usize) -> RasterImage<T> {
        let (x, y) = self.origin(id);
        self.source.crop(x, y, self.n, self.n).expect("patch inside source")
    }
}

/// Which already-filled strips a placement overlaps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapSides {
    pub left: bool,
    pub top: bool,
}

/// Sum of squared differences between the canvas and patch `id` over the
/// overlap strips of a placement at `(px, py)`. The corner block is
/// counted once. Returns `None` once the partial sum exceeds `bound`.
fn overlap_ssd<T: Scalar>(
    canvas: &RasterImage<T>,
    (px, py): (usize, usize),
    set: &PatchSet<T>,
    id: usize,
    overlap: usize,
    sides: OverlapSides,
    bound: T,
) -> Option<T> {
    let n = set.n;
    let ch = canvas.channels();
    let (sx, sy) = set.origin(id);
    let src = set.source.data();
    let dst = canvas.data();
    let (sw, cw) = (set.source.width(), canvas.width());
    let mut total = T::zero();
    for j in 0..n {
        let (x_end, x_from) = match (sides.left, sides.top && j < overlap) {
            (_, true) => (n, 0),
            (true, false) => (overlap, 0),
            (false, false) => (0, 0),
        };
        if x_end == x_from {
            continue;
        }
        let s0 = ((sy + j) * sw + sx + x_from) * ch;
        let d0 = ((py + j) * cw + px + x_from) * ch;
        let len = (x_end - x_from) * ch;
        for (a, b) in src[s0..s0 + len].iter().zip(&dst[d0..d0 + len]) {
            let d = *a - *b;
            total = total + d * d;
        }
        if total > bound {
            return None;
        }
    }
    Some(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchChoice {
    pub id: usize,
    pub ssd: f64,
    pub min_ssd: f64,
    pub pool_size: usize,
}

/// Picks uniformly among the patches whose overlap SSD is within
/// `(1 + tolerance) · min`.
pub fn best_match<T: Scalar, R: Rng>(
    canvas: &RasterImage<T>,
    at: (usize, usize),
    sides: OverlapSides,
    set: &PatchSet<T>,
    overlap: usize,
    tolerance: f64,
    rng: &mut R,
) -> PatchChoice {
    let factor = T::of(1.0 + tolerance);
    let mut best = T::infinity();
    let mut scored: Vec<(usize, T)> = Vec::new();
    for id in 0..set.len() {
        let bound = if best.is_finite() { best * factor } else { T::infinity() };
        if let Some(ssd) = overlap_ssd(canvas, at, set, id, overlap, sides, bound) {
            if ssd < best {
                best = ssd;
            }
            scored.push((id, ssd));
        }
    }
    let limit = best * factor;
    let pool: Vec<(usize, T)> = scored.into_iter().filter(|&(_, s)| s <= limit).collect();
    let (id, ssd) = pool[rng.random_range(0..pool.len())];
    PatchChoice {
        id,
        ssd: ssd.to_f64_lossy(),
        min_ssd: best.to_f64_lossy(),
        pool_size: pool.len(),
    }
}

/// One cut index per row of a strip; `|cut[i+1] − cut[i]| ≤ 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeamPath {
    pub cuts: Vec<usize>,
    pub cost: f64,
}

impl SeamPath {
    pub fn is_monotone(&self, width: usize) -> bool {
        self.cuts.iter().all(|&c| c < width) && self.cuts.windows(2).all(|w| w[0].abs_diff(w[1]) <= 1)
    }
}

/// Per-pixel squared error summed over channels, row-major.
pub fn error_surface<T: Scalar>(a: &RasterImage<T>, b: &RasterImage<T>) -> Result<Vec<f64>> {
    a.ensure_same_shape(b)?;
    let ch = a.channels();
    Ok(a.data()
        .chunks_exact(ch)
        .zip(b.data().chunks_exact(ch))
        .map(|(p, q)| p.iter().zip(q).map(|(&x, &y)| (x - y).to_f64_lossy().powi(2)).sum())
        .collect())
}

/// Minimum-cost 8-connected path from the top row to the bottom row of a
/// `width × height` error surface. Ties prefer the column nearer the
/// center.
pub fn min_cost_path(errors: &[f64], width: usize, height: usize) -> SeamPath {
    assert_eq!(errors.len(), width * height);
    assert!(width > 0 && height > 0);
    let center = (width - 1) as f64 / 2.0;
    let closer = |a: usize, b: usize| (a as f64 - center).abs() < (b as f64 - center).abs();
    let mut acc = errors[..width].to_vec();
    let mut back = vec![0usize; width * height];
    for y in 1..height {
        let prev = acc.clone();
        for x in 0..width {
            let mut from = x;
            for c in [x.wrapping_sub(1), x + 1] {
                if c < width && (prev[c] < prev[from] || (prev[c] == prev[from] && from != x && closer(c, from))) {
                    from = c;
                }
            }
            back[y * width + x] = from;
            acc[x] = prev[from] + errors[y * width + x];
        }
    }
    let mut end = 0;
    for x in 1..width {
        if acc[x] < acc[end] || (acc[x] == acc[end] && closer(x, end)) {
            end = x;
        }
    }
    let cost = acc[end];
    let mut cuts = vec![0; height];
    cuts[height - 1] = end;
    for y in (1..height).rev() {
        cuts[y - 1] = back[y * width + cuts[y]];
    }
    SeamPath { cuts, cost }
}

/// Cut through the overlap of two equally sized strips, running along
/// their height.
pub fn min_error_boundary<T: Scalar>(ov1: &RasterImage<T>, ov2: &RasterImage<T>) -> Result<SeamPath> {
    let e = error_surface(ov1, ov2)?;
    Ok(min_cost_path(&e, ov1.width(), ov1.height()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    /// Top-left corner on the (uncropped) canvas.
    pub x: usize,
    pub y: usize,
    pub patch: usize,
    pub source_x: usize,
    pub source_y: usize,
    /// Cut through the left strip, one column index per patch row.
    pub left_seam: Option<SeamPath>,
    /// Cut through the top strip, one row index per patch column.
    pub top_seam: Option<SeamPath>,
    pub ssd: f64,
    pub pool_size: usize,
}

impl Placement {
    /// Whether local pixel `(i, j)` of this patch survives its seams.
    pub fn owns(&self, i: usize, j: usize) -> bool {
        self.left_seam.as_ref().is_none_or(|s| i >= s.cuts[j]) && self.top_seam.as_ref().is_none_or(|s| j >= s.cuts[i])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuiltPlan {
    pub output_width: usize,
    pub output_height: usize,
    pub patch_n: usize,
    pub overlap: usize,
    pub placements: Vec<Placement>,
}

impl QuiltPlan {
    /// Source coordinate of every output pixel, row-major.
    pub fn provenance(&self) -> Vec<(usize, usize)> {
        let (w, h) = (self.output_width, self.output_height);
        let mut map = vec![None; w * h];
        for p in &self.placements {
            for j in 0..self.patch_n {
                for i in 0..self.patch_n {
                    let (x, y) = (p.x + i, p.y + j);
                    if x < w && y < h && p.owns(i, j) {
                        map[y * w + x] = Some((p.source_x + i, p.source_y + j));
                    }
                }
            }
        }
        map.into_iter().map(|m| m.expect("placements cover the output")).collect()
    }

    /// Rebuilds the quilted image from the plan alone.
    pub fn render<T: Scalar>(&self, source: &RasterImage<T>) -> RasterImage<T> {
        let prov = self.provenance();
        let w = self.output_width;
        RasterImage::from_fn(w, self.output_height, source.channels(), |x, y, c| {
            let (sx, sy) = prov[y * w + x];
            source.get(sx, sy, c)
        })
    }
}

fn grid_positions(out: usize, n: usize, step: usize) -> Vec<usize> {
    let mut v = vec![0];
    while v.last().unwrap() + n < out {
        v.push(v.last().unwrap() + step);
    }
    v
}

fn strip<T: Scalar>(img: &RasterImage<T>, x: usize, y: usize, w: usize, h: usize, transpose: bool) -> RasterImage<T> {
    let crop = img.crop(x, y, w, h).expect("strip inside image");
    if !transpose {
        return crop;
    }
    RasterImage::from_fn(h, w, crop.channels(), |i, j, c| crop.get(j, i, c))
}

/// Quilts a `width × height` texture from `source`.
pub fn quilt<T: Scalar>(
    source: &RasterImage<T>,
    width: usize,
    height: usize,
    params: &QuiltParams,
) -> Result<(RasterImage<T>, QuiltPlan)> {
    params.validate()?;
    let set = sample_patches(source, params.patch_n)?;
    if width < params.patch_n || height < params.patch_n {
        return Err(Error::InvalidParameter(format!(
            "output {width}x{height} is smaller than patch size {}",
            params.patch_n
        )));
    }
    let (n, ov) = (params.patch_n, params.overlap);
    let xs = grid_positions(width, n, params.step());
    let ys = grid_positions(height, n, params.step());
    let (cw, chh) = (xs.last().unwrap() + n, ys.last().unwrap() + n);
    let mut canvas = RasterImage::new(cw, chh, source.channels());
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut placements = Vec::with_capacity(xs.len() * ys.len());
    for (row, &py) in ys.iter().enumerate() {
        for (col, &px) in xs.iter().enumerate() {
            let sides = OverlapSides {
                left: col > 0 && ov > 0,
                top: row > 0 && ov > 0,
            };
            let choice = if !sides.left && !sides.top {
                let id = rng.random_range(0..set.len());
                PatchChoice {
                    id,
                    ssd: 0.0,
                    min_ssd: 0.0,
                    pool_size: set.len(),
                }
            } else {
                best_match(&canvas, (px, py), sides, &set, ov, params.tolerance, &mut rng)
            };
            let (sx, sy) = set.origin(choice.id);
            let left_seam = sides.left.then(|| {
                let old = strip(&canvas, px, py, ov, n, false);
                let new = strip(source, sx, sy, ov, n, false);
                min_error_boundary(&old, &new).expect("strips share a shape")
            });
            let top_seam = sides.top.then(|| {
                let old = strip(&canvas, px, py, n, ov, true);
                let new = strip(source, sx, sy, n, ov, true);
                min_error_boundary(&old, &new).expect("strips share a shape")
            });
            let placement = Placement {
                x: px,
                y: py,
                patch: choice.id,
                source_x: sx,
                source_y: sy,
                left_seam,
                top_seam,
                ssd: choice.ssd,
                pool_size: choice.pool_size,
            };
            for j in 0..n {
                for i in 0..n {
                    if placement.owns(i, j) {
                        canvas.pixel_mut(px + i, py + j).copy_from_slice(source.pixel(sx + i, sy + j));
                    }
                }
            }
            placements.push(placement);
        }
    }
    let out = canvas.crop(0, 0, width, height)?;
    Ok((
        out,
        QuiltPlan {
            output_width: width,
            output_height: height,
            patch_n: n,
            overlap: ov,
            placements,
        },
    ))
}

/// Largest axis-aligned square of pixels all equal to `class`, as
/// `(x, y, side)`; ties go to the first in raster order of the bottom-right
/// corner.
pub fn largest_class_square(labels: &LabelMap, class: ClassId) -> Option<(usize, usize, usize)> {
    let (w, h) = labels.dimensions();
    let mut side = vec![0usize; w * h];
    let mut best: Option<(usize, usize, usize)> = None;
    for y in 0..h {
        for x in 0..w {
            if labels.get(x, y) != class {
                continue;
            }
            let s = if x == 0 || y == 0 {
                1
            } else {
                1 + side[(y - 1) * w + x].min(side[y * w + x - 1]).min(side[(y - 1) * w + x - 1])
            };
            side[y * w + x] = s;
            if best.is_none_or(|b| s > b.2) {
                best = Some((x + 1 - s, y + 1 - s, s));
            }
        }
    }
    best
}

#[derive(Clone, Debug)]
pub struct FallbackOutcome<T> {
    pub image: RasterImage<T>,
    pub applied: bool,
    pub warning: Option<String>,
    pub plan: Option<QuiltPlan>,
}

/// Replaces the `wall_class` pixels of `synth` with texture quilted from
/// `source_region` of `synth` when `quality > threshold`. Every other
/// pixel is left untouched.
pub fn composite_fallback<T: Scalar>(
    synth: &RasterImage<T>,
    labels: &LabelMap,
    wall_class: ClassId,
    source_region: Rect,
    quality: f64,
    threshold: f64,
    params: &QuiltParams,
) -> Result<FallbackOutcome<T>> {
    if labels.dimensions() != synth.dimensions() {
        return Err(Error::InvalidInput("labels and image differ in size".into()));
    }
    let unchanged = |warning: Option<String>| FallbackOutcome {
        image: synth.clone(),
        applied: false,
        warning,
        plan: None,
    };
    if quality <= threshold {
        return Ok(unchanged(None));
    }
    let wall: BinaryMask = labels.mask_of(wall_class);
    let Some((bx, by, bw, bh)) = wall.bounding_box() else {
        let msg = format!("class {wall_class} absent; fallback skipped");
        log::warn!("{msg}");
        return Ok(unchanged(Some(msg)));
    };
    if !source_region.fits_in(synth.width(), synth.height()) {
        return Err(Error::InvalidInput(format!("source region {source_region:?} outside the image")));
    }
    let exemplar = synth.crop(source_region.x, source_region.y, source_region.width, source_region.height)?;
    let (tw, th) = (bw.max(params.patch_n), bh.max(params.patch_n));
    let (texture, plan) = quilt(&exemplar, tw, th, params)?;
    let mut image = synth.clone();
    for y in by..by + bh {
        for x in bx..bx + bw {
            if wall.get(x, y) {
                image.pixel_mut(x, y).copy_from_slice(texture.pixel(x - bx, y - by));
            }
        }
    }
    Ok(FallbackOutcome {
        image,
        applied: true,
        warning: None,
        plan: Some(plan),
    })
}
