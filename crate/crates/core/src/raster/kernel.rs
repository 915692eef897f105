use super::image::RasterImage;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Square odd-sized correlation kernel, row-major `(2r+1)²` weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel<T> {
    radius: usize,
    weights: Vec<T>,
}

impl<T: Scalar> Kernel<T> {
    pub fn new(radius: usize, weights: Vec<T>) -> Result<Self> {
        let side = 2 * radius + 1;
        if weights.len() != side * side {
            return Err(Error::InvalidParameter(format!(
                "kernel of radius {radius} needs {} weights, got {}",
                side * side,
                weights.len()
            )));
        }
        Ok(Self { radius, weights })
    }

    /// Builds a 3×3 kernel from rows.
    pub fn from_3x3(rows: [[f64; 3]; 3]) -> Self {
        let weights = rows.iter().flatten().map(|&v| T::of(v)).collect();
        Self { radius: 1, weights }
    }

    pub fn sobel_x() -> Self {
        Self::from_3x3([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
    }

    pub fn sobel_y() -> Self {
        Self::from_3x3([[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]])
    }

    #[inline]
    pub fn radius(&self) -> usize {
        self.radius
    }

    #[inline]
    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Weight at signed offset `(i, j)` from the center, `i` along x.
    #[inline]
    pub fn at(&self, i: isize, j: isize) -> T {
        let r = self.radius as isize;
        self.weights[((j + r) * (2 * r + 1) + (i + r)) as usize]
    }
}

/// Normalized isotropic Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianKernel<T> {
    sigma: f64,
    kernel: Kernel<T>,
}

impl<T: Scalar> GaussianKernel<T> {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn radius(&self) -> usize {
        self.kernel.radius
    }

    pub fn weights(&self) -> &[T] {
        &self.kernel.weights
    }

    pub fn kernel(&self) -> &Kernel<T> {
        &self.kernel
    }
}

impl<T> AsRef<Kernel<T>> for GaussianKernel<T> {
    fn as_ref(&self) -> &Kernel<T> {
        &self.kernel
    }
}

impl<T> AsRef<Kernel<T>> for Kernel<T> {
    fn as_ref(&self) -> &Kernel<T> {
        self
    }
}

/// `exp(-(i²+j²)/(2σ²)) / (2πσ²)` before normalization.
pub fn gaussian_weight(sigma: f64, i: f64, j: f64) -> f64 {
    (-(i * i + j * j) / (2.0 * sigma * sigma)).exp() / (2.0 * std::f64::consts::PI * sigma * sigma)
}

/// Gaussian with radius `ceil(3σ)`.
pub fn gaussian_kernel<T: Scalar>(sigma: f64) -> Result<GaussianKernel<T>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
    }
    gaussian_kernel_with_radius(sigma, (3.0 * sigma).ceil() as usize)
}

/// Gaussian truncated to an explicit radius.
pub fn gaussian_kernel_with_radius<T: Scalar>(sigma: f64, radius: usize) -> Result<GaussianKernel<T>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
    }
    let r = radius as isize;
    let raw: Vec<f64> = (-r..=r)
        .flat_map(|j| (-r..=r).map(move |i| gaussian_weight(sigma, i as f64, j as f64)))
        .collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| T::of(w / total)).collect();
    Ok(GaussianKernel {
        sigma,
        kernel: Kernel { radius, weights },
    })
}

/// 2-D correlation of every channel with reflect padding.
pub fn convolve<T: Scalar>(img: &RasterImage<T>, kernel: impl AsRef<Kernel<T>>) -> Result<RasterImage<T>> {
    let k = kernel.as_ref();
    let side = k.side();
    if side > img.width() || side > img.height() {
        return Err(Error::InvalidParameter(format!(
            "{side}x{side} kernel larger than {}x{} image",
            img.width(),
            img.height()
        )));
    }
    let r = k.radius as isize;
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let mut out = RasterImage::new(w, h, ch);
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = T::zero();
                for j in -r..=r {
                    for i in -r..=r {
                        acc = acc + k.at(i, j) * img.get_reflected(x as isize + i, y as isize + j, c);
                    }
                }
                out.set(x, y, c, acc);
            }
        }
    }
    Ok(out)
}
