//! Pixel- and spectral-domain descriptors of an image: low/high frequency
//! split, rectified Harris corner response, and log spectrum.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{convolve, gaussian_kernel, gaussian_kernel_with_radius, luma, Kernel, RasterImage};
use crate::scalar::Scalar;

pub const DEFAULT_FREQUENCY_SIGMA: f64 = 3.0;
pub const SPECTRUM_EPSILON: f64 = 1e-8;

/// Gaussian low-pass of the grayscale image and its residual.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyPair<T> {
    pub low: RasterImage<T>,
    /// Signed residual `gray − low`.
    pub high: RasterImage<T>,
}

pub fn frequency_maps<T: Scalar>(img: &RasterImage<T>, sigma: f64) -> Result<FrequencyPair<T>> {
    let gray = luma(img);
    // Truncate the blur on images narrower than its support.
    let radius = gaussian_kernel::<T>(sigma)?.radius();
    let max_radius = (gray.width().min(gray.height()) - 1) / 2;
    let low = convolve(&gray, gaussian_kernel_with_radius::<T>(sigma, radius.min(max_radius))?)?;
    let high = gray.zip_map(&low, |g, l| g - l)?;
    Ok(FrequencyPair { low, high })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarrisParams {
    pub k: f64,
    /// Scale applied after rectification.
    pub omega: f64,
    pub window_sigma: f64,
    pub window_radius: usize,
    /// Exponent on the trace: 2 is the classic detector, 1 reads the
    /// response formula without the square.
    pub trace_power: u32,
}

impl Default for HarrisParams {
    fn default() -> Self {
        Self {
            k: 0.05,
            omega: 100_000.0,
            window_sigma: 1.0,
            window_radius: 2,
            trace_power: 2,
        }
    }
}

impl HarrisParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k < 0.25) {
            return Err(Error::InvalidParameter(format!("harris k must be in (0, 0.25), got {}", self.k)));
        }
        if !(self.omega > 0.0) {
            return Err(Error::InvalidParameter("harris omega must be > 0".into()));
        }
        if !(self.window_sigma > 0.0) {
            return Err(Error::InvalidParameter("harris window sigma must be > 0".into()));
        }
        if self.trace_power != 1 && self.trace_power != 2 {
            return Err(Error::InvalidParameter("trace power must be 1 or 2".into()));
        }
        Ok(())
    }
}

/// `ω · max(0, R)`, one value per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct CornerMap<T>(pub RasterImage<T>);

impl<T: Scalar> CornerMap<T> {
    pub fn values(&self) -> &RasterImage<T> {
        &self.0
    }

    pub fn max(&self) -> T {
        self.0.min_max().1
    }
}

/// Rectified, scaled Harris response computed from Sobel gradients and a
/// Gaussian-windowed structure tensor.
pub fn corner_map<T: Scalar>(img: &RasterImage<T>, params: &HarrisParams) -> Result<CornerMap<T>> {
    params.validate()?;
    if img.width() < 3 || img.height() < 3 {
        return Err(Error::InvalidInput("corner map needs at least 3x3 pixels".into()));
    }
    let gray = luma(img);
    let ix = convolve(&gray, Kernel::sobel_x())?;
    let iy = convolve(&gray, Kernel::sobel_y())?;
    let ixx = ix.zip_map(&ix, |a, b| a * b)?;
    let iyy = iy.zip_map(&iy, |a, b| a * b)?;
    let ixy = ix.zip_map(&iy, |a, b| a * b)?;
    // The window shrinks on images too small for it.
    let max_radius = (img.width().min(img.height()) - 1) / 2;
    let window = gaussian_kernel_with_radius::<T>(params.window_sigma, params.window_radius.min(max_radius))?;
    let sxx = convolve(&ixx, &window)?;
    let syy = convolve(&iyy, &window)?;
    let sxy = convolve(&ixy, &window)?;
    let k = T::of(params.k);
    let omega = T::of(params.omega);
    let mut out = RasterImage::new(img.width(), img.height(), 1);
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        let (a, b, c) = (sxx.data()[i], syy.data()[i], sxy.data()[i]);
        let det = a * b - c * c;
        let trace = a + b;
        let r = det - k * trace.powi(params.trace_power as i32);
        *v = omega * r.max(T::zero());
    }
    Ok(CornerMap(out))
}

/// How the complex spectrum is reduced to a real value before the log.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumReduction {
    /// `√(Re² + Im²)`; invariant under circular shifts.
    #[default]
    Magnitude,
    /// `|Re| + |Im|`.
    AbsSum,
}

/// `log(1 + ‖F‖ + ε)` of the `1/(HW)`-normalized DFT, DC at `(0, 0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumMap<T>(pub RasterImage<T>);

impl<T: Scalar> SpectrumMap<T> {
    pub fn values(&self) -> &RasterImage<T> {
        &self.0
    }

    /// Quadrant-swapped copy with DC in the middle, for display.
    pub fn centered(&self) -> RasterImage<T> {
        let (w, h) = self.0.dimensions();
        RasterImage::from_fn(w, h, 1, |x, y, _| self.0.get((x + w - w / 2) % w, (y + h - h / 2) % h, 0))
    }
}

/// Normalized 2-D DFT of the grayscale image (rows, then columns).
pub fn dft2<T: Scalar>(img: &RasterImage<T>) -> Vec<Complex<T>> {
    let gray = luma(img);
    let (w, h) = gray.dimensions();
    let mut buf: Vec<Complex<T>> = gray.data().iter().map(|&v| Complex::new(v, T::zero())).collect();
    let mut planner = FftPlanner::<T>::new();
    let row_fft = planner.plan_fft_forward(w);
    for row in buf.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_forward(h);
    let mut col = vec![Complex::new(T::zero(), T::zero()); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = buf[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            buf[y * w + x] = col[y];
        }
    }
    let norm = T::one() / T::of_usize(w * h);
    buf.iter_mut().for_each(|c| *c = *c * norm);
    buf
}

pub fn spectrum_map<T: Scalar>(img: &RasterImage<T>) -> SpectrumMap<T> {
    spectrum_map_with(img, SpectrumReduction::Magnitude, SPECTRUM_EPSILON)
}

pub fn spectrum_map_with<T: Scalar>(img: &RasterImage<T>, reduction: SpectrumReduction, epsilon: f64) -> SpectrumMap<T> {
    let (w, h) = img.dimensions();
    let eps = T::of(epsilon);
    let values = dft2(img)
        .into_iter()
        .map(|c| {
            let m = match reduction {
                SpectrumReduction::Magnitude => c.norm(),
                SpectrumReduction::AbsSum => c.re.abs() + c.im.abs(),
            };
            (T::one() + m + eps).ln()
        })
        .collect();
    SpectrumMap(RasterImage::from_vec(w, h, 1, values).expect("spectrum has image dimensions"))
}

/// All descriptors for one image.
#[derive(Clone, Debug)]
pub struct MultiDomainMaps<T> {
    pub frequency: FrequencyPair<T>,
    pub corners: CornerMap<T>,
    pub spectrum: SpectrumMap<T>,
}

pub fn multi_domain_maps<T: Scalar>(
    img: &RasterImage<T>,
    sigma: f64,
    harris: &HarrisParams,
) -> Result<MultiDomainMaps<T>> {
    Ok(MultiDomainMaps {
        frequency: frequency_maps(img, sigma)?,
        corners: corner_map(img, harris)?,
        spectrum: spectrum_map(img),
    })
}
