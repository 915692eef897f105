//! Direction-guided PatchMatch completion of void regions.
//!
//! A pyramid is built over the input. The coarsest usable level is seeded
//! by a greedy inward fill, finer levels inherit the upsampled field and
//! fill, and every level runs alternating scanline propagation and
//! cross-buffer random expansion, re-synthesizing the void by weighted
//! patch voting after each iteration.

mod cost;
mod distance;
mod nnf;
mod params;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use cost::{
    appearance_cost, direction_cost, patch_weights, proximity_cost, proximity_scale, total_cost, CostModel,
    Offset,
};
pub use distance::{distance_to_boundary, DistanceField};
pub use nnf::{
    propagate, radius_schedule, random_search, random_search_pass, sample_candidate, NearestNeighborField,
    ScanOrder,
};
pub use params::{CompletionParams, DirectionVariant};

use crate::error::{Error, Result};
use crate::raster::{build_pyramid, snap_to_palette, BinaryMask, LabelMap, RasterImage};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    /// Energy after re-costing on the current fill, before the passes.
    pub energy_before: f64,
    /// Energy after propagation and random expansion.
    pub energy_after: f64,
    pub propagated: usize,
    pub expanded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub width: usize,
    pub height: usize,
    pub void_pixels: usize,
    pub iterations: Vec<IterationReport>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompletionReport {
    /// Levels actually optimized, coarsest first.
    pub levels: Vec<LevelReport>,
}

impl CompletionReport {
    pub fn final_energy(&self) -> Option<f64> {
        self.levels
            .last()
            .and_then(|l| l.iterations.last())
            .map(|i| i.energy_after)
    }

    pub fn iteration_count(&self) -> usize {
        self.levels.iter().map(|l| l.iterations.len()).sum()
    }
}

#[derive(Clone, Debug)]
pub struct CompletionResult<T> {
    /// Input with the void filled; known pixels are untouched.
    pub image: RasterImage<T>,
    /// Finest-level field after the last iteration.
    pub nnf: NearestNeighborField<T>,
    /// Fill the finest field was optimized against (before the final vote).
    pub search_image: RasterImage<T>,
    pub report: CompletionReport,
}

#[derive(Clone, Debug)]
pub struct LabelCompletion<T> {
    pub labels: LabelMap,
    pub result: CompletionResult<T>,
}

fn level_seed(seed: u64, level: usize) -> u64 {
    seed ^ (level as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Fills void pixels by Gaussian-weighted voting of every overlapping
/// target patch's source patch.
pub fn vote<T: Scalar>(
    current: &RasterImage<T>,
    nnf: &NearestNeighborField<T>,
    patch_size: usize,
    weights: &[T],
) -> RasterImage<T> {
    let (w, h) = current.dimensions();
    let ch = current.channels();
    let r = (patch_size / 2) as isize;
    let side = patch_size as isize;
    let mut acc = vec![T::zero(); w * h * ch];
    let mut wsum = vec![T::zero(); w * h];
    for (&(px, py), &v) in nnf.targets().iter().zip(nnf.offsets()) {
        for j in -r..=r {
            for i in -r..=r {
                let (x, y) = (px as isize + i, py as isize + j);
                if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
                    continue;
                }
                let (xu, yu) = (x as usize, y as usize);
                if !nnf.void().get(xu, yu) {
                    continue;
                }
                let wt = weights[((j + r) * side + (i + r)) as usize];
                let (sx, sy) = (x + v.dx as isize, y + v.dy as isize);
                for c in 0..ch {
                    let a = &mut acc[(yu * w + xu) * ch + c];
                    *a = *a + wt * current.get_reflected(sx, sy, c);
                }
                wsum[yu * w + xu] = wsum[yu * w + xu] + wt;
            }
        }
    }
    let mut out = current.clone();
    for &(x, y) in nnf.targets() {
        let ws = wsum[y * w + x];
        for c in 0..ch {
            out.set(x, y, c, acc[(y * w + x) * ch + c] / ws);
        }
    }
    out
}

/// Greedy inward fill: void pixels are visited by increasing distance to
/// the boundary and copy the centre of the best source patch, comparing
/// only pixels that are known or already filled. Candidates are the known
/// pixels inside the axis-aligned buffer through `p`. Returns the fill and
/// the chosen offsets (raster order of void pixels).
pub fn onion_fill<T: Scalar>(
    img: &RasterImage<T>,
    void: &BinaryMask,
    dist: &DistanceField,
    params: &CompletionParams,
) -> (RasterImage<T>, Vec<Offset>) {
    let (w, h) = img.dimensions();
    let ch = img.channels();
    let r = params.half_patch() as isize;
    let hw = params.buffer_halfwidth();
    let weights: Vec<T> = patch_weights(params.patch_size, params.patch_sigma());
    let sigma_c = proximity_scale(w, h);
    let (lp, ld) = (T::of(params.lambda_proximity), T::of(params.lambda_direction));

    let mut out = img.clone();
    let mut filled: Vec<bool> = void.bits().iter().map(|b| !b).collect();
    let mut order = void.set_pixels();
    order.sort_by(|a, b| {
        dist.get(a.0, a.1)
            .partial_cmp(&dist.get(b.0, b.1))
            .unwrap()
            .then((a.1, a.0).cmp(&(b.1, b.0)))
    });
    let mut chosen = vec![Offset::ZERO; w * h];
    let in_bounds = |x: isize, y: isize| x >= 0 && y >= 0 && x < w as isize && y < h as isize;

    for &(px, py) in &order {
        let mut best: Option<(T, Offset)> = None;
        let consider = |qx: usize, qy: usize, best: &mut Option<(T, Offset)>, out: &RasterImage<T>, filled: &[bool]| {
            if void.get(qx, qy) {
                return;
            }
            let v = Offset::new(qx as i32 - px as i32, qy as i32 - py as i32);
            let mut acc = T::zero();
            let mut wsum = T::zero();
            let mut k = 0;
            for j in -r..=r {
                for i in -r..=r {
                    let wt = weights[k];
                    k += 1;
                    let (tx, ty) = (px as isize + i, py as isize + j);
                    let (sx, sy) = (qx as isize + i, qy as isize + j);
                    if !in_bounds(tx, ty) || !in_bounds(sx, sy) {
                        continue;
                    }
                    let (ti, si) = (ty as usize * w + tx as usize, sy as usize * w + sx as usize);
                    if !filled[ti] || !filled[si] {
                        continue;
                    }
                    let mut d = T::zero();
                    for c in 0..ch {
                        d = d + (out.get(tx as usize, ty as usize, c) - out.get(sx as usize, sy as usize, c)).abs();
                    }
                    acc = acc + wt * d;
                    wsum = wsum + wt;
                }
            }
            if wsum <= T::zero() {
                return;
            }
            let appearance = acc / (wsum * T::of_usize(ch));
            let e = total_cost(
                appearance,
                proximity_cost((px, py), v, dist, sigma_c),
                direction_cost(v, &params.directions, params.direction_variant),
                lp,
                ld,
            );
            if best.is_none_or(|(b, _)| e < b) {
                *best = Some((e, v));
            }
        };
        // Horizontal band, then the vertical band minus their overlap.
        let y0 = py.saturating_sub(hw);
        let y1 = (py + hw).min(h - 1);
        let x0 = px.saturating_sub(hw);
        let x1 = (px + hw).min(w - 1);
        for qy in y0..=y1 {
            for qx in 0..w {
                consider(qx, qy, &mut best, &out, &filled);
            }
        }
        for qy in (0..h).filter(|&qy| qy < y0 || qy > y1) {
            for qx in x0..=x1 {
                consider(qx, qy, &mut best, &out, &filled);
            }
        }
        let v = match best {
            Some((_, v)) => v,
            None => {
                let (nx, ny) = dist.nearest(px, py);
                Offset::new(nx as i32 - px as i32, ny as i32 - py as i32)
            }
        };
        let (sx, sy) = ((px as isize + v.dx as isize) as usize, (py as isize + v.dy as isize) as usize);
        for c in 0..ch {
            let val = out.get(sx, sy, c);
            out.set(px, py, c, val);
        }
        filled[py * w + px] = true;
        chosen[py * w + px] = v;
    }
    let offsets = void.set_pixels().into_iter().map(|(x, y)| chosen[y * w + x]).collect();
    (out, offsets)
}

/// Completes the void region of `img`.
pub fn complete_image<T: Scalar>(
    img: &RasterImage<T>,
    void: &BinaryMask,
    params: &CompletionParams,
) -> Result<CompletionResult<T>> {
    params.validate()?;
    if img.dimensions() != void.dimensions() {
        return Err(Error::InvalidInput(format!(
            "mask {:?} does not match image {:?}",
            void.dimensions(),
            img.dimensions()
        )));
    }
    if img.width() < params.patch_size || img.height() < params.patch_size {
        return Err(Error::InvalidInput(format!(
            "{}x{} image is smaller than the {} px patch",
            img.width(),
            img.height(),
            params.patch_size
        )));
    }
    if void.is_full() {
        return Err(Error::DegenerateMask("every pixel is void".into()));
    }
    if void.is_empty() {
        let dist = distance_to_boundary(void)?;
        let model = CostModel::new(img, void, &dist, params);
        return Ok(CompletionResult {
            image: img.clone(),
            nnf: NearestNeighborField::from_offsets(&model, Vec::new()),
            search_image: img.clone(),
            report: CompletionReport::default(),
        });
    }

    let pyramid = build_pyramid(img, void, params.min_level_dim)?;
    let levels = pyramid.into_levels();
    // Skip coarse levels whose void swallowed every known pixel or whose
    // side is shorter than a patch.
    let start = levels
        .iter()
        .position(|(im, m)| !m.is_full() && im.width() >= params.patch_size && im.height() >= params.patch_size)
        .expect("finest level has known pixels");

    let mut report = CompletionReport::default();
    let mut prev: Option<(RasterImage<T>, NearestNeighborField<T>)> = None;
    let mut last_search = img.clone();

    for (li, (level_img, level_void)) in levels.iter().enumerate().skip(start) {
        let mut rng = ChaCha8Rng::seed_from_u64(level_seed(params.seed, li));
        let dist = distance_to_boundary(level_void)?;

        let mut onion_offsets = None;
        let mut current = match &prev {
            None => {
                let (fill, offsets) = onion_fill(level_img, level_void, &dist, params);
                onion_offsets = Some(offsets);
                fill
            }
            Some((coarse, _)) => {
                let mut init = level_img.clone();
                for (x, y) in level_void.set_pixels() {
                    let (cx, cy) = ((x / 2).min(coarse.width() - 1), (y / 2).min(coarse.height() - 1));
                    for c in 0..init.channels() {
                        init.set(x, y, c, coarse.get(cx, cy, c));
                    }
                }
                init
            }
        };

        let mut nnf = {
            let model = CostModel::new(&current, level_void, &dist, params);
            match &prev {
                None => NearestNeighborField::from_offsets(&model, onion_offsets.take().unwrap()),
                Some((_, coarse_nnf)) => NearestNeighborField::upsample(coarse_nnf, &model),
            }
        };

        let mut level_report = LevelReport {
            width: level_img.width(),
            height: level_img.height(),
            void_pixels: nnf.len(),
            iterations: Vec::with_capacity(params.iterations_per_level),
        };
        for it in 0..params.iterations_per_level {
            let model = CostModel::new(&current, level_void, &dist, params);
            nnf.recompute_costs(&model);
            let before = nnf.energy();
            let propagated = propagate(&mut nnf, &model, ScanOrder::for_iteration(it));
            let expanded = random_search_pass(&mut nnf, &model, &mut rng);
            let after = nnf.energy();
            debug_assert!(nnf.is_valid(&model));
            level_report.iterations.push(IterationReport {
                energy_before: before.to_f64_lossy(),
                energy_after: after.to_f64_lossy(),
                propagated,
                expanded,
            });
            let filled = vote(&current, &nnf, params.patch_size, model.weights());
            if it + 1 == params.iterations_per_level {
                last_search = current.clone();
            }
            current = filled;
        }
        log::debug!(
            "level {}x{}: energy {:?}",
            level_report.width,
            level_report.height,
            level_report.iterations.last().map(|i| i.energy_after)
        );
        report.levels.push(level_report);
        prev = Some((current, nnf));
    }

    let (mut image, nnf) = prev.expect("at least one level ran");
    // Known pixels come straight from the input.
    for (x, y) in void.invert().set_pixels() {
        for c in 0..img.channels() {
            image.set(x, y, c, img.get(x, y, c));
        }
    }
    Ok(CompletionResult {
        image,
        nnf,
        search_image: last_search,
        report,
    })
}

/// Completes a label map: its palette rendering is completed, then snapped
/// back to classes. Known pixels keep their original class.
pub fn complete_labels<T: Scalar>(
    labels: &LabelMap,
    void: &BinaryMask,
    params: &CompletionParams,
) -> Result<LabelCompletion<T>> {
    let rendered = labels.render::<T>();
    let result = complete_image(&rendered, void, params)?;
    let mut out = snap_to_palette(&result.image, labels.palette())?;
    for (x, y) in void.invert().set_pixels() {
        out.set(x, y, labels.get(x, y));
    }
    Ok(LabelCompletion { labels: out, result })
}

#[cfg(test)]
mod tests;
