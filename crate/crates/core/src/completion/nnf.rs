use rand::Rng;

use super::cost::{CostModel, Offset};
use crate::raster::BinaryMask;
use crate::scalar::Scalar;

/// Raster scan direction for propagation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanOrder {
    Forward,
    Reverse,
}

impl ScanOrder {
    pub fn for_iteration(i: usize) -> Self {
        if i % 2 == 0 {
            Self::Forward
        } else {
            Self::Reverse
        }
    }
}

/// Offsets and cached costs for every void pixel of one level.
#[derive(Clone, Debug, PartialEq)]
pub struct NearestNeighborField<T> {
    void: BinaryMask,
    /// Void pixels in raster order.
    targets: Vec<(usize, usize)>,
    offsets: Vec<Offset>,
    costs: Vec<T>,
}

impl<T: Scalar> NearestNeighborField<T> {
    /// Field with every offset pointing at a uniformly random known pixel.
    pub fn random(model: &CostModel<'_, T>, rng: &mut impl Rng) -> Self {
        let void = model.void.clone();
        let known: Vec<(usize, usize)> = void.invert().set_pixels();
        let targets = void.set_pixels();
        let offsets = targets
            .iter()
            .map(|&(x, y)| {
                let (kx, ky) = known[rng.random_range(0..known.len())];
                Offset::new(kx as i32 - x as i32, ky as i32 - y as i32)
            })
            .collect();
        let mut nnf = Self {
            void,
            costs: vec![T::zero(); targets.len()],
            targets,
            offsets,
        };
        nnf.recompute_costs(model);
        nnf
    }

    /// Builds a field from explicit offsets, one per void pixel in raster order.
    pub fn from_offsets(model: &CostModel<'_, T>, offsets: Vec<Offset>) -> Self {
        let targets = model.void.set_pixels();
        assert_eq!(targets.len(), offsets.len(), "one offset per void pixel");
        let mut nnf = Self {
            void: model.void.clone(),
            costs: vec![T::zero(); targets.len()],
            targets,
            offsets,
        };
        nnf.recompute_costs(model);
        nnf
    }

    /// Transfers a coarser field: each child inherits twice its parent's
    /// offset, redirected to the nearest known pixel when that lands in the
    /// void or outside the image.
    pub fn upsample(coarse: &Self, model: &CostModel<'_, T>) -> Self {
        let (cw, _) = coarse.void.dimensions();
        let mut lookup = vec![None; coarse.void.width() * coarse.void.height()];
        for (k, &(x, y)) in coarse.targets.iter().enumerate() {
            lookup[y * cw + x] = Some(coarse.offsets[k]);
        }
        let (w, h) = model.void.dimensions();
        let offsets = model
            .void
            .set_pixels()
            .into_iter()
            .map(|(x, y)| {
                let (px, py) = ((x / 2).min(cw - 1), (y / 2).min(coarse.void.height() - 1));
                let parent = lookup[py * cw + px].unwrap_or(Offset::ZERO).scaled(2);
                if parent != Offset::ZERO && model.is_valid((x, y), parent) {
                    return parent;
                }
                let (tx, ty) = parent.apply(x, y);
                let tx = tx.clamp(0, w as isize - 1) as usize;
                let ty = ty.clamp(0, h as isize - 1) as usize;
                let (nx, ny) = model.distance.nearest(tx, ty);
                Offset::new(nx as i32 - x as i32, ny as i32 - y as i32)
            })
            .collect();
        Self::from_offsets(model, offsets)
    }

    pub fn void(&self) -> &BinaryMask {
        &self.void
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn targets(&self) -> &[(usize, usize)] {
        &self.targets
    }

    pub fn offsets(&self) -> &[Offset] {
        &self.offsets
    }

    pub fn costs(&self) -> &[T] {
        &self.costs
    }

    /// Offset of void pixel `(x, y)`, or `None` for known pixels.
    pub fn offset_at(&self, x: usize, y: usize) -> Option<Offset> {
        self.index_of(x, y).map(|k| self.offsets[k])
    }

    fn index_of(&self, x: usize, y: usize) -> Option<usize> {
        if !self.void.get(x, y) {
            return None;
        }
        self.targets.binary_search_by(|&(tx, ty)| (ty, tx).cmp(&(y, x))).ok()
    }

    pub fn energy(&self) -> T {
        self.costs.iter().copied().sum()
    }

    pub fn recompute_costs(&mut self, model: &CostModel<'_, T>) {
        for (k, &p) in self.targets.iter().enumerate() {
            self.costs[k] = model.total(p, self.offsets[k]);
        }
    }

    /// Every offset lands on a known in-bounds pixel.
    pub fn is_valid(&self, model: &CostModel<'_, T>) -> bool {
        self.targets
            .iter()
            .zip(&self.offsets)
            .all(|(&p, &v)| model.is_valid(p, v))
    }

    /// Replaces the offset at target `k` when `v` is valid and strictly cheaper.
    #[inline]
    fn try_improve(&mut self, model: &CostModel<'_, T>, k: usize, v: Offset) -> bool {
        let p = self.targets[k];
        if v == self.offsets[k] || !model.is_valid(p, v) {
            return false;
        }
        let cost = model.total(p, v);
        if cost < self.costs[k] {
            self.offsets[k] = v;
            self.costs[k] = cost;
            true
        } else {
            false
        }
    }
}

/// One scanline pass: every void pixel tries the offsets of its four
/// neighbours. Returns the number of adopted offsets.
pub fn propagate<T: Scalar>(
    nnf: &mut NearestNeighborField<T>,
    model: &CostModel<'_, T>,
    order: ScanOrder,
) -> usize {
    let (w, h) = nnf.void.dimensions();
    // Dense index for O(1) neighbour lookup.
    let mut index = vec![usize::MAX; w * h];
    for (k, &(x, y)) in nnf.targets.iter().enumerate() {
        index[y * w + x] = k;
    }
    let n = nnf.targets.len();
    let mut adopted = 0;
    for step in 0..n {
        let k = match order {
            ScanOrder::Forward => step,
            ScanOrder::Reverse => n - 1 - step,
        };
        let (x, y) = nnf.targets[k];
        let neighbours = [
            (x.wrapping_sub(1), y),
            (x, y.wrapping_sub(1)),
            (x + 1, y),
            (x, y + 1),
        ];
        for (nx, ny) in neighbours {
            if nx >= w || ny >= h {
                continue;
            }
            let q = index[ny * w + nx];
            if q == usize::MAX {
                continue;
            }
            let v = nnf.offsets[q];
            if nnf.try_improve(model, k, v) {
                adopted += 1;
            }
        }
    }
    adopted
}

/// Radii `max(w,h), max(w,h)/2, …, 1`.
pub fn radius_schedule(width: usize, height: usize) -> Vec<usize> {
    let mut r = width.max(height);
    let mut out = Vec::new();
    while r >= 1 {
        out.push(r);
        r /= 2;
    }
    out
}

const SAMPLE_ATTEMPTS: usize = 8;

/// Uniform draw from known pixels within Chebyshev radius `r` of `p` that
/// also lie inside the cross-shaped buffer around the horizontal and
/// vertical lines through `p`.
pub fn sample_candidate(
    void: &BinaryMask,
    p: (usize, usize),
    radius: usize,
    halfwidth: usize,
    rng: &mut impl Rng,
) -> Option<(usize, usize)> {
    let (w, h) = void.dimensions();
    let (px, py) = p;
    let x0 = px.saturating_sub(radius);
    let x1 = (px + radius).min(w - 1);
    let y0 = py.saturating_sub(radius);
    let y1 = (py + radius).min(h - 1);
    // Horizontal band: full x range, narrow y range; vertical band likewise.
    let hy0 = y0.max(py.saturating_sub(halfwidth));
    let hy1 = y1.min(py + halfwidth);
    let vx0 = x0.max(px.saturating_sub(halfwidth));
    let vx1 = x1.min(px + halfwidth);
    let area_h = (x1 - x0 + 1) * (hy1 - hy0 + 1);
    let area_v = (vx1 - vx0 + 1) * (y1 - y0 + 1);
    for _ in 0..SAMPLE_ATTEMPTS {
        let pick_h = rng.random_range(0..area_h + area_v) < area_h;
        let (x, y) = if pick_h {
            (rng.random_range(x0..=x1), rng.random_range(hy0..=hy1))
        } else {
            (rng.random_range(vx0..=vx1), rng.random_range(y0..=y1))
        };
        // Points in both bands are reachable twice; halve their acceptance.
        let in_both = (hy0..=hy1).contains(&y) && (vx0..=vx1).contains(&x);
        if in_both && rng.random_bool(0.5) {
            continue;
        }
        if !void.get(x, y) {
            return Some((x, y));
        }
    }
    None
}

/// Random expansion for the `k`-th void pixel with a halving radius. Each
/// radius draws one candidate around `p` and one around its current match.
/// Returns the number of accepted candidates.
pub fn random_search<T: Scalar>(
    nnf: &mut NearestNeighborField<T>,
    model: &CostModel<'_, T>,
    k: usize,
    rng: &mut impl Rng,
) -> usize {
    let (w, h) = nnf.void.dimensions();
    let halfwidth = model.params.buffer_halfwidth();
    let mut accepted = 0;
    for r in radius_schedule(w, h) {
        for _ in 0..model.params.samples_per_radius {
            expand_once(nnf, model, k, r, halfwidth, rng, &mut accepted);
        }
    }
    accepted
}

fn expand_once<T: Scalar>(
    nnf: &mut NearestNeighborField<T>,
    model: &CostModel<'_, T>,
    k: usize,
    r: usize,
    halfwidth: usize,
    rng: &mut impl Rng,
    accepted: &mut usize,
) {
    let p = nnf.targets[k];
    {
        if let Some((qx, qy)) = sample_candidate(&nnf.void, p, r, halfwidth, rng) {
            let v = Offset::new(qx as i32 - p.0 as i32, qy as i32 - p.1 as i32);
            if nnf.try_improve(model, k, v) {
                *accepted += 1;
            }
        }
        if let Some(v) = sample_near_match(&nnf.void, p, nnf.offsets[k], r, halfwidth, rng) {
            if nnf.try_improve(model, k, v) {
                *accepted += 1;
            }
        }
    }
}

/// Draw within Chebyshev radius `r` of the current match `p + v`, kept only
/// if it is known and inside the buffer through `p`.
fn sample_near_match(
    void: &BinaryMask,
    p: (usize, usize),
    v: Offset,
    radius: usize,
    halfwidth: usize,
    rng: &mut impl Rng,
) -> Option<Offset> {
    let (w, h) = void.dimensions();
    let (mx, my) = v.apply(p.0, p.1);
    let r = radius as i64;
    let x = (mx as i64 + rng.random_range(-r..=r)).clamp(0, w as i64 - 1) as usize;
    let y = (my as i64 + rng.random_range(-r..=r)).clamp(0, h as i64 - 1) as usize;
    let in_buffer = x.abs_diff(p.0) <= halfwidth || y.abs_diff(p.1) <= halfwidth;
    (in_buffer && !void.get(x, y)).then(|| Offset::new(x as i32 - p.0 as i32, y as i32 - p.1 as i32))
}

/// Random expansion over every void pixel in raster order.
pub fn random_search_pass<T: Scalar>(
    nnf: &mut NearestNeighborField<T>,
    model: &CostModel<'_, T>,
    rng: &mut impl Rng,
) -> usize {
    (0..nnf.len()).map(|k| random_search(nnf, model, k, rng)).sum()
}
