use crate::error::{Error, Result};
use crate::raster::BinaryMask;

/// Exact Euclidean distance from every void pixel to the nearest known
/// pixel, plus the location of that pixel. Known pixels map to themselves.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceField {
    width: usize,
    height: usize,
    distance: Vec<f64>,
    nearest: Vec<(u32, u32)>,
}

impl DistanceField {
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.distance[y * self.width + x]
    }

    /// Nearest known pixel to `(x, y)`.
    #[inline]
    pub fn nearest(&self, x: usize, y: usize) -> (usize, usize) {
        let (nx, ny) = self.nearest[y * self.width + x];
        (nx as usize, ny as usize)
    }

    pub fn values(&self) -> &[f64] {
        &self.distance
    }
}

/// Separable squared-distance transform (lower envelope of parabolas).
pub fn distance_to_boundary(void: &BinaryMask) -> Result<DistanceField> {
    let (w, h) = void.dimensions();
    if void.is_full() {
        return Err(Error::DegenerateMask("every pixel is void".into()));
    }
    const NONE: usize = usize::MAX;

    // Column pass: nearest known row in the same column.
    let mut col_near = vec![NONE; w * h];
    for x in 0..w {
        let mut last = NONE;
        for y in 0..h {
            if !void.get(x, y) {
                last = y;
            }
            col_near[y * w + x] = last;
        }
        let mut last = NONE;
        for y in (0..h).rev() {
            if !void.get(x, y) {
                last = y;
            }
            if last != NONE {
                let cur = col_near[y * w + x];
                if cur == NONE || last - y < y - cur {
                    col_near[y * w + x] = last;
                }
            }
        }
    }

    let mut distance = vec![0.0; w * h];
    let mut nearest = vec![(0u32, 0u32); w * h];
    let mut sites: Vec<usize> = Vec::with_capacity(w);
    let mut bounds: Vec<f64> = Vec::with_capacity(w + 1);
    for y in 0..h {
        let f = |x: usize| -> f64 {
            let r = col_near[y * w + x];
            let d = r.abs_diff(y) as f64;
            d * d
        };
        let has = |x: usize| col_near[y * w + x] != NONE;
        sites.clear();
        bounds.clear();
        for q in (0..w).filter(|&q| has(q)) {
            let fq = f(q);
            loop {
                match sites.last() {
                    None => {
                        sites.push(q);
                        bounds.push(f64::NEG_INFINITY);
                        break;
                    }
                    Some(&v) => {
                        let s = ((fq + (q * q) as f64) - (f(v) + (v * v) as f64))
                            / (2.0 * (q as f64 - v as f64));
                        if s <= *bounds.last().unwrap() {
                            sites.pop();
                            bounds.pop();
                        } else {
                            sites.push(q);
                            bounds.push(s);
                            break;
                        }
                    }
                }
            }
        }
        if sites.is_empty() {
            // Cannot happen: at least one column has a known pixel somewhere,
            // so every row sees that column's nearest known row.
            unreachable!("no known pixel reachable from row {y}");
        }
        let mut k = 0;
        for x in 0..w {
            while k + 1 < sites.len() && bounds[k + 1] < x as f64 {
                k += 1;
            }
            let q = sites[k];
            let dx = x as f64 - q as f64;
            let i = y * w + x;
            distance[i] = (dx * dx + f(q)).sqrt();
            nearest[i] = (q as u32, col_near[y * w + q] as u32);
        }
    }
    Ok(DistanceField {
        width: w,
        height: h,
        distance,
        nearest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(mask: &BinaryMask, x: usize, y: usize) -> f64 {
        if !mask.get(x, y) {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for qy in 0..mask.height() {
            for qx in 0..mask.width() {
                if !mask.get(qx, qy) {
                    let dx = qx as f64 - x as f64;
                    let dy = qy as f64 - y as f64;
                    best = best.min((dx * dx + dy * dy).sqrt());
                }
            }
        }
        best
    }

    #[test]
    fn adjacent_void_pixel_is_one() {
        let mut m = BinaryMask::new(5, 5);
        m.set(2, 2, true);
        let d = distance_to_boundary(&m).unwrap();
        assert_eq!(d.get(2, 2), 1.0);
        assert_eq!(d.get(0, 0), 0.0);
        assert_eq!(d.nearest(0, 0), (0, 0));
    }

    #[test]
    fn all_void_is_degenerate() {
        let m = BinaryMask::from_fn(4, 4, |_, _| true);
        assert!(matches!(distance_to_boundary(&m), Err(Error::DegenerateMask(_))));
    }

    #[test]
    fn matches_brute_force_on_random_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for density in [0.2, 0.5, 0.9, 0.98] {
            let m = BinaryMask::from_fn(32, 32, |_, _| rng.random_bool(density));
            if m.is_full() {
                continue;
            }
            let d = distance_to_boundary(&m).unwrap();
            for y in 0..32 {
                for x in 0..32 {
                    let expect = brute(&m, x, y);
                    assert!((d.get(x, y) - expect).abs() < 1e-9, "({x},{y}) {} vs {expect}", d.get(x, y));
                    let (nx, ny) = d.nearest(x, y);
                    assert!(!m.get(nx, ny));
                    let nd = ((nx as f64 - x as f64).powi(2) + (ny as f64 - y as f64).powi(2)).sqrt();
                    assert!((nd - expect).abs() < 1e-9);
                }
            }
        }
    }
}
