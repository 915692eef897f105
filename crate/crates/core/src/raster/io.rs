//! PNG reading and writing. Files are written to a temporary sibling and
//! renamed into place, so a failed write never leaves a partial file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageEncoder, ImageFormat, ImageReader};

use super::image::RasterImage;
use super::label::{LabelMap, Palette};
use super::mask::BinaryMask;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[inline]
pub fn to_u8<T: Scalar>(v: T) -> u8 {
    (v.to_f64_lossy() * 255.0).round().clamp(0.0, 255.0) as u8
}

#[inline]
pub fn from_u8<T: Scalar>(v: u8) -> T {
    T::of(v as f64 / 255.0)
}

fn decode(path: &Path) -> Result<DynamicImage> {
    if !path.exists() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png) => {}
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                message: format!("expected PNG, found {other:?}"),
            })
        }
    }
    reader.decode().map_err(|e| Error::MalformedImage {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Loads an 8-bit gray or RGB PNG (alpha is dropped) as unit floats.
pub fn load_png<T: Scalar>(path: impl AsRef<Path>) -> Result<RasterImage<T>> {
    let path = path.as_ref();
    let img = decode(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, bytes) = match img {
        DynamicImage::ImageLuma8(b) => (1, b.into_raw()),
        DynamicImage::ImageLumaA8(_) => (1, img.to_luma8().into_raw()),
        DynamicImage::ImageRgb8(b) => (3, b.into_raw()),
        DynamicImage::ImageRgba8(_) => (3, img.to_rgb8().into_raw()),
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                message: format!("unsupported sample layout {:?}", other.color()),
            })
        }
    };
    RasterImage::from_vec(w, h, channels, bytes.into_iter().map(from_u8).collect())
}

pub fn encode_png<T: Scalar>(img: &RasterImage<T>) -> Result<Vec<u8>> {
    let bytes: Vec<u8> = img.data().iter().map(|&v| to_u8(v)).collect();
    let color = if img.channels() == 1 {
        image::ExtendedColorType::L8
    } else {
        image::ExtendedColorType::Rgb8
    };
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(&bytes, img.width() as u32, img.height() as u32, color)
        .map_err(|e| Error::InvalidInput(format!("png encoding failed: {e}")))?;
    Ok(out)
}

pub fn save_png<T: Scalar>(img: &RasterImage<T>, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_png(img)?)
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Nonzero samples mark void pixels.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let img: RasterImage<f32> = load_png(path)?;
    let bits = img
        .data()
        .chunks_exact(img.channels())
        .map(|p| p.iter().any(|&v| v > 0.0))
        .collect();
    BinaryMask::from_vec(img.width(), img.height(), bits)
}

pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let img = RasterImage::<f32>::from_fn(mask.width(), mask.height(), 1, |x, y, _| {
        if mask.get(x, y) {
            1.0
        } else {
            0.0
        }
    });
    save_png(&img, path)
}

pub fn load_palette(path: impl AsRef<Path>) -> Result<Palette> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let palette: Palette = serde_json::from_str(&text)?;
    // Re-validate through the checked constructor.
    Palette::new(palette.entries().to_vec())
}

pub fn save_palette(palette: &Palette, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(palette)?;
    write_atomic(path.as_ref(), text.as_bytes())
}

/// Sidecar location for a label PNG: same stem, `.json` extension.
pub fn palette_sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Reads a label PNG; colors not in the palette are snapped to the nearest class.
pub fn load_label_map(path: impl AsRef<Path>, palette: &Palette) -> Result<LabelMap> {
    let path = path.as_ref();
    let img: RasterImage<f64> = load_png(path)?;
    if img.channels() != 3 {
        return Err(Error::InvalidInput(format!(
            "label map {} must be RGB or paletted",
            path.display()
        )));
    }
    let mut off_palette = 0usize;
    let classes = img
        .data()
        .chunks_exact(3)
        .map(|p| {
            let rgb = [to_u8(p[0]), to_u8(p[1]), to_u8(p[2])];
            palette.id_by_color(rgb).unwrap_or_else(|| {
                off_palette += 1;
                palette.nearest(p)
            })
        })
        .collect();
    if off_palette > 0 {
        log::warn!(
            "{}: {off_palette} pixels not in palette were snapped",
            path.display()
        );
    }
    LabelMap::new(img.width(), img.height(), classes, palette.clone())
}

/// Writes an indexed-color PNG plus the JSON palette sidecar.
pub fn save_label_map(labels: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let entries = labels.palette().entries();
    if entries.len() > 256 {
        return Err(Error::InvalidInput("palette exceeds 256 entries".into()));
    }
    let plte: Vec<u8> = entries.iter().flat_map(|e| e.color).collect();
    let indices: Vec<u8> = labels
        .classes()
        .iter()
        .map(|c| entries.iter().position(|e| e.id == *c).unwrap() as u8)
        .collect();
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, labels.width() as u32, labels.height() as u32);
        enc.set_color(png::ColorType::Indexed);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_palette(plte);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::InvalidInput(format!("png encoding failed: {e}")))?;
        writer
            .write_image_data(&indices)
            .map_err(|e| Error::InvalidInput(format!("png encoding failed: {e}")))?;
    }
    write_atomic(path, &out)?;
    save_palette(labels.palette(), palette_sidecar(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rgb_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        let mut s = 99u32;
        let img = RasterImage::<f64>::from_fn(9, 7, 3, |_, _, _| {
            s = s.wrapping_mul(1103515245).wrapping_add(12345);
            from_u8((s >> 16) as u8)
        });
        save_png(&img, &path).unwrap();
        let back: RasterImage<f64> = load_png(&path).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn gray_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.png");
        let img = RasterImage::<f32>::from_fn(5, 4, 1, |x, y, _| from_u8((x * 40 + y) as u8));
        save_png(&img, &path).unwrap();
        assert_eq!(load_png::<f32>(&path).unwrap(), img);
    }

    #[test]
    fn missing_file_is_not_found() {
        let err = load_png::<f64>("/definitely/not/here.png").unwrap_err();
        assert!(matches!(err, Error::NotFound(_)));
    }

    #[test]
    fn sixteen_bit_is_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("deep.png");
        let buf = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_pixel(4, 4, image::Luma([1000]));
        buf.save(&path).unwrap();
        let err = load_png::<f64>(&path).unwrap_err();
        assert!(matches!(err, Error::UnsupportedFormat { .. }), "{err:?}");
    }

    #[test]
    fn garbage_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.png");
        let mut bytes = vec![0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A];
        bytes.extend_from_slice(&[1, 2, 3, 4, 5]);
        fs::write(&path, bytes).unwrap();
        let err = load_png::<f64>(&path).unwrap_err();
        assert!(matches!(err, Error::MalformedImage { .. }), "{err:?}");
    }

    #[test]
    fn label_map_round_trip_through_indexed_png() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.png");
        let pal = Palette::facade();
        let labels = LabelMap::from_fn(10, 6, pal.clone(), |x, y| ((x * y) % 6) as u8).unwrap();
        save_label_map(&labels, &path).unwrap();
        let sidecar = load_palette(palette_sidecar(&path)).unwrap();
        assert_eq!(sidecar, pal);
        assert_eq!(load_label_map(&path, &sidecar).unwrap(), labels);
    }

    #[test]
    fn mask_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let m = BinaryMask::from_rect(8, 8, 2, 3, 3, 2);
        save_mask(&m, &path).unwrap();
        assert_eq!(load_mask(&path).unwrap(), m);
    }
}
