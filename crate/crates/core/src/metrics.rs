//! Image-to-image losses and quality metrics.
//!
//! Images are stored on `[0, 1]`; PSNR and SSIM rescale to `[0, 255]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{corner_map, frequency_maps, spectrum_map, HarrisParams, DEFAULT_FREQUENCY_SIGMA};
use crate::raster::{gaussian_kernel_with_radius, RasterImage};
use crate::scalar::Scalar;

pub const PIXEL_MAX: f64 = 255.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = (0.01 * PIXEL_MAX) * (0.01 * PIXEL_MAX);
pub const SSIM_C2: f64 = (0.03 * PIXEL_MAX) * (0.03 * PIXEL_MAX);

fn mean_abs_diff<T: Scalar>(a: &RasterImage<T>, b: &RasterImage<T>) -> T {
    let n = a.data().len();
    let sum: T = a.data().iter().zip(b.data()).map(|(&x, &y)| (x - y).abs()).sum();
    sum / T::of_usize(n.max(1))
}

fn check_pair<T: Scalar>(a: &RasterImage<T>, b: &RasterImage<T>) -> Result<()> {
    if a.dimensions() != b.dimensions() {
        return Err(Error::InvalidInput(format!(
            "image sizes differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// `mean|a_L − b_L| + mean|a_H − b_H|` over the frequency maps.
pub fn detail_loss_pixel<T: Scalar>(a: &RasterImage<T>, b: &RasterImage<T>, sigma: f64) -> Result<T> {
    check_pair(a, b)?;
    let fa = frequency_maps(a, sigma)?;
    let fb = frequency_maps(b, sigma)?;
    Ok(mean_abs_diff(&fa.low, &fb.low) + mean_abs_diff(&fa.high, &fb.high))
}

/// `mean|F(a) − F(b)|` over the spectrum maps.
pub fn detail_loss_spectral<T: Scalar>(a: &RasterImage<T>, b: &RasterImage<T>) -> Result<T> {
    check_pair(a, b)?;
    Ok(mean_abs_diff(spectrum_map(a).values(), spectrum_map(b).values()))
}

pub fn detail_loss<T: Scalar>(a: &RasterImage<T>, b: &RasterImage<T>, sigma: f64) -> Result<T> {
    Ok(detail_loss_pixel(a, b, sigma)? + detail_loss_spectral(a, b)?)
}

/// `mean|C(a) − C(b)|` over the corner maps.
pub fn regularity_loss<T: Scalar>(a: &RasterImage<T>, b: &RasterImage<T>, harris: &HarrisParams) -> Result<T> {
    check_pair(a, b)?;
    Ok(mean_abs_diff(corner_map(a, harris)?.values(), corner_map(b, harris)?.values()))
}

/// `mean(max(0, 1 − real)) + mean(max(0, 1 − fake))`. An empty map adds 0.
pub fn hinge_terms<T: Scalar>(real: &[T], fake: &[T]) -> T {
    let term = |s: &[T]| {
        if s.is_empty() {
            return T::zero();
        }
        let sum: T = s.iter().map(|&v| (T::one() - v).max(T::zero())).sum();
        sum / T::of_usize(s.len())
    };
    term(real) + term(fake)
}

/// Peak signal-to-noise ratio in dB; `f64::INFINITY` for identical images.
pub fn psnr<T: Scalar>(a: &RasterImage<T>, b: &RasterImage<T>) -> Result<f64> {
    check_pair(a, b)?;
    if a.channels() != b.channels() {
        return Err(Error::InvalidInput("channel counts differ".into()));
    }
    let n = a.data().len();
    let sse: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = (x.to_f64_lossy() - y.to_f64_lossy()) * PIXEL_MAX;
            d * d
        })
        .sum();
    let mse = sse / n as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (PIXEL_MAX * PIXEL_MAX / mse).log10())
}

/// Mean SSIM over all fully contained 11×11 Gaussian windows, averaged
/// over channels.
pub fn ssim<T: Scalar>(a: &RasterImage<T>, b: &RasterImage<T>) -> Result<f64> {
    check_pair(a, b)?;
    if a.channels() != b.channels() {
        return Err(Error::InvalidInput("channel counts differ".into()));
    }
    let (w, h) = a.dimensions();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidInput(format!("ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {w}x{h}")));
    }
    let kernel = gaussian_kernel_with_radius::<f64>(SSIM_SIGMA, SSIM_WINDOW / 2)?;
    let kernel = kernel.as_ref();
    let r = SSIM_WINDOW / 2;
    let mut total = 0.0;
    for c in 0..a.channels() {
        let ca = a.channel(c).cast::<f64>().map(|v| v * PIXEL_MAX);
        let cb = b.channel(c).cast::<f64>().map(|v| v * PIXEL_MAX);
        let mut sum = 0.0;
        let mut count = 0usize;
        for y0 in 0..=h - SSIM_WINDOW {
            for x0 in 0..=w - SSIM_WINDOW {
                let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for j in 0..SSIM_WINDOW {
                    for i in 0..SSIM_WINDOW {
                        let g = kernel.at(i as isize - r as isize, j as isize - r as isize);
                        let (va, vb) = (ca.get(x0 + i, y0 + j, 0), cb.get(x0 + i, y0 + j, 0));
                        ma += g * va;
                        mb += g * vb;
                        saa += g * va * va;
                        sbb += g * vb * vb;
                        sab += g * va * vb;
                    }
                }
                let var_a = saa - ma * ma;
                let var_b = sbb - mb * mb;
                let cov = sab - ma * mb;
                sum += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                    / ((ma * ma + mb * mb + SSIM_C1) * (var_a + var_b + SSIM_C2));
                count += 1;
            }
        }
        total += sum / count as f64;
    }
    Ok(total / a.channels() as f64)
}

/// Loss weights of the full training objective. Only the detail and
/// regularity terms are computable here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub lambda_fm: f64,
    pub lambda_p: f64,
    pub lambda_d: f64,
    pub lambda_r: f64,
    /// Listed with the others but never attached to a term; unused.
    pub lambda_extra: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_fm: 10.0,
            lambda_p: 10.0,
            lambda_d: 10.0,
            lambda_r: 10.0,
            lambda_extra: 5e-6,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda_fm, self.lambda_p, self.lambda_d, self.lambda_r, self.lambda_extra];
        if all.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("loss weights must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// `λ_d·detail + λ_r·regularity` for a computed report.
    pub fn weighted_structure_loss(&self, report: &MetricReport) -> f64 {
        self.lambda_d * report.detail_loss + self.lambda_r * report.regularity_loss
    }
}

mod psnr_serde {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(de::Error::custom(format!("invalid psnr value {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// dB; identical images serialize as `"inf"`.
    #[serde(with = "psnr_serde")]
    pub psnr: f64,
    /// `None` when the images are smaller than the SSIM window.
    pub ssim: Option<f64>,
    pub detail_loss: f64,
    pub detail_pixel: f64,
    pub detail_spectral: f64,
    pub regularity_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricParams {
    pub frequency_sigma: f64,
    pub harris: HarrisParams,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self {
            frequency_sigma: DEFAULT_FREQUENCY_SIGMA,
            harris: HarrisParams::default(),
        }
    }
}

pub fn metric_report<T: Scalar>(a: &RasterImage<T>, b: &RasterImage<T>, params: &MetricParams) -> Result<MetricReport> {
    check_pair(a, b)?;
    let detail_pixel = detail_loss_pixel(a, b, params.frequency_sigma)?.to_f64_lossy();
    let detail_spectral = detail_loss_spectral(a, b)?.to_f64_lossy();
    let ssim = if a.width() >= SSIM_WINDOW && a.height() >= SSIM_WINDOW {
        Some(ssim(a, b)?)
    } else {
        log::warn!("images smaller than {SSIM_WINDOW}x{SSIM_WINDOW}; ssim omitted");
        None
    };
    Ok(MetricReport {
        psnr: psnr(a, b)?,
        ssim,
        detail_loss: detail_pixel + detail_spectral,
        detail_pixel,
        detail_spectral,
        regularity_loss: regularity_loss(a, b, &params.harris)?.to_f64_lossy(),
    })
}
