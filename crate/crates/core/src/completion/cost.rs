use super::distance::DistanceField;
use super::params::{CompletionParams, DirectionVariant};
use crate::raster::{gaussian_kernel_with_radius, BinaryMask, RasterImage};
use crate::scalar::Scalar;

/// Translation from a target pixel to its source pixel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Offset {
    pub dx: i32,
    pub dy: i32,
}

impl Offset {
    pub const ZERO: Offset = Offset { dx: 0, dy: 0 };

    #[inline]
    pub const fn new(dx: i32, dy: i32) -> Self {
        Self { dx, dy }
    }

    #[inline]
    pub fn norm_sq(self) -> i64 {
        let (x, y) = (self.dx as i64, self.dy as i64);
        x * x + y * y
    }

    #[inline]
    pub fn apply(self, x: usize, y: usize) -> (isize, isize) {
        (x as isize + self.dx as isize, y as isize + self.dy as isize)
    }

    #[inline]
    pub fn scaled(self, k: i32) -> Self {
        Self::new(self.dx * k, self.dy * k)
    }
}

/// Normalized Gaussian weights over a `W × W` patch, row-major.
pub fn patch_weights<T: Scalar>(patch_size: usize, sigma: f64) -> Vec<T> {
    gaussian_kernel_with_radius::<T>(sigma, patch_size / 2)
        .expect("positive sigma")
        .weights()
        .to_vec()
}

/// Gaussian-weighted mean absolute difference between the patches centred
/// on `p` and `p + v`, averaged over channels. Coordinates are reflected
/// at the image border.
pub fn appearance_cost<T: Scalar>(
    img: &RasterImage<T>,
    p: (usize, usize),
    v: Offset,
    patch_size: usize,
    weights: &[T],
) -> T {
    let r = (patch_size / 2) as isize;
    let (px, py) = (p.0 as isize, p.1 as isize);
    let (qx, qy) = (px + v.dx as isize, py + v.dy as isize);
    let ch = img.channels();
    let inv_ch = T::one() / T::of_usize(ch);
    let (w, h) = (img.width() as isize, img.height() as isize);
    let inside = |x: isize, y: isize| x - r >= 0 && y - r >= 0 && x + r < w && y + r < h;
    if inside(px, py) && inside(qx, qy) {
        let data = img.data();
        let side = 2 * r as usize + 1;
        let row = side * ch;
        let mut acc = T::zero();
        for j in 0..side {
            let ta = (((py - r) as usize + j) * w as usize + (px - r) as usize) * ch;
            let sa = (((qy - r) as usize + j) * w as usize + (qx - r) as usize) * ch;
            let (trow, srow) = (&data[ta..ta + row], &data[sa..sa + row]);
            let wrow = &weights[j * side..(j + 1) * side];
            for (i, &wt) in wrow.iter().enumerate() {
                let mut d = T::zero();
                for c in 0..ch {
                    d = d + (trow[i * ch + c] - srow[i * ch + c]).abs();
                }
                acc = acc + wt * d;
            }
        }
        return acc * inv_ch;
    }
    let mut acc = T::zero();
    let mut k = 0;
    for j in -r..=r {
        for i in -r..=r {
            let mut d = T::zero();
            for c in 0..ch {
                d = d + (img.get_reflected(px + i, py + j, c) - img.get_reflected(qx + i, qy + j, c)).abs();
            }
            acc = acc + weights[k] * d * inv_ch;
            k += 1;
        }
    }
    acc
}

/// `‖v‖² / (σ_d(p)² + σ_c²)`.
pub fn proximity_cost<T: Scalar>(p: (usize, usize), v: Offset, dist: &DistanceField, sigma_c: f64) -> T {
    let sd = dist.get(p.0, p.1);
    T::of(v.norm_sq() as f64 / (sd * sd + sigma_c * sigma_c))
}

/// Direction preference of an offset; zero offset scores 0.
pub fn direction_cost<T: Scalar>(v: Offset, directions: &[f64], variant: DirectionVariant) -> T {
    if v == Offset::ZERO {
        return T::zero();
    }
    let theta_v = (v.dy as f64).atan2(v.dx as f64);
    let score = |theta: f64| {
        let c = (theta_v - theta).cos();
        match variant {
            DirectionVariant::Literal => c,
            DirectionVariant::AxisPenalty => 1.0 - c.abs(),
        }
    };
    T::of(directions.iter().map(|&t| score(t)).fold(f64::INFINITY, f64::min))
}

/// `σ_c = max(w, h) / 8`.
pub fn proximity_scale(width: usize, height: usize) -> f64 {
    width.max(height) as f64 / 8.0
}

/// Everything needed to evaluate `E(p, v)` on one pyramid level.
pub struct CostModel<'a, T> {
    pub image: &'a RasterImage<T>,
    pub void: &'a BinaryMask,
    pub distance: &'a DistanceField,
    pub params: &'a CompletionParams,
    weights: Vec<T>,
    sigma_c: f64,
    lambda_p: T,
    lambda_d: T,
}

impl<'a, T: Scalar> CostModel<'a, T> {
    pub fn new(
        image: &'a RasterImage<T>,
        void: &'a BinaryMask,
        distance: &'a DistanceField,
        params: &'a CompletionParams,
    ) -> Self {
        Self {
            image,
            void,
            distance,
            params,
            weights: patch_weights(params.patch_size, params.patch_sigma()),
            sigma_c: proximity_scale(image.width(), image.height()),
            lambda_p: T::of(params.lambda_proximity),
            lambda_d: T::of(params.lambda_direction),
        }
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn sigma_c(&self) -> f64 {
        self.sigma_c
    }

    /// `p + v` is inside the image and known.
    #[inline]
    pub fn is_valid(&self, p: (usize, usize), v: Offset) -> bool {
        let (x, y) = v.apply(p.0, p.1);
        x >= 0
            && y >= 0
            && (x as usize) < self.image.width()
            && (y as usize) < self.image.height()
            && !self.void.get(x as usize, y as usize)
    }

    pub fn appearance(&self, p: (usize, usize), v: Offset) -> T {
        appearance_cost(self.image, p, v, self.params.patch_size, &self.weights)
    }

    pub fn proximity(&self, p: (usize, usize), v: Offset) -> T {
        proximity_cost(p, v, self.distance, self.sigma_c)
    }

    pub fn direction(&self, v: Offset) -> T {
        direction_cost(v, &self.params.directions, self.params.direction_variant)
    }

    /// `E_a + λ₁·E_p + λ₂·E_d`.
    pub fn total(&self, p: (usize, usize), v: Offset) -> T {
        total_cost(
            self.appearance(p, v),
            self.proximity(p, v),
            self.direction(v),
            self.lambda_p,
            self.lambda_d,
        )
    }
}

#[inline]
pub fn total_cost<T: Scalar>(appearance: T, proximity: T, direction: T, lambda_p: T, lambda_d: T) -> T {
    appearance + lambda_p * proximity + lambda_d * direction
}
