use super::image::RasterImage;
use super::label::LabelMap;
use super::mask::BinaryMask;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Content that can be halved for a pyramid level.
pub trait Downsample: Sized {
    fn dimensions(&self) -> (usize, usize);
    /// Halves both dimensions (rounding up).
    fn downsample(&self) -> Self;
}

impl<T: Scalar> Downsample for RasterImage<T> {
    fn dimensions(&self) -> (usize, usize) {
        RasterImage::dimensions(self)
    }

    /// Box average over the (up to four) children of each coarse pixel.
    fn downsample(&self) -> Self {
        let (w, h) = (self.width(), self.height());
        let (cw, ch) = (w.div_ceil(2), h.div_ceil(2));
        RasterImage::from_fn(cw, ch, self.channels(), |x, y, c| {
            let mut acc = T::zero();
            let mut n = 0usize;
            for yy in 2 * y..(2 * y + 2).min(h) {
                for xx in 2 * x..(2 * x + 2).min(w) {
                    acc = acc + self.get(xx, yy, c);
                    n += 1;
                }
            }
            acc / T::of_usize(n)
        })
    }
}

impl Downsample for LabelMap {
    fn dimensions(&self) -> (usize, usize) {
        LabelMap::dimensions(self)
    }

    /// Majority class of the children, lowest id on ties.
    fn downsample(&self) -> Self {
        let (w, h) = (self.width(), self.height());
        LabelMap::from_fn(w.div_ceil(2), h.div_ceil(2), self.palette().clone(), |x, y| {
            let mut kids = Vec::with_capacity(4);
            for yy in 2 * y..(2 * y + 2).min(h) {
                for xx in 2 * x..(2 * x + 2).min(w) {
                    kids.push(self.get(xx, yy));
                }
            }
            kids.sort_unstable();
            let mut best = (0usize, kids[0]);
            let mut i = 0;
            while i < kids.len() {
                let run = kids[i..].iter().take_while(|&&k| k == kids[i]).count();
                if run > best.0 {
                    best = (run, kids[i]);
                }
                i += run;
            }
            best.1
        })
        .expect("classes come from the same palette")
    }
}

impl BinaryMask {
    /// A coarse pixel is set if any of its children is set.
    pub fn downsample_any(&self) -> Self {
        let (w, h) = self.dimensions();
        BinaryMask::from_fn(w.div_ceil(2), h.div_ceil(2), |x, y| {
            (2 * y..(2 * y + 2).min(h)).any(|yy| (2 * x..(2 * x + 2).min(w)).any(|xx| self.get(xx, yy)))
        })
    }
}

/// Coarse-to-fine chain of (content, mask) pairs with factor 2 per level.
#[derive(Clone, Debug)]
pub struct ImagePyramid<I> {
    levels: Vec<(I, BinaryMask)>,
}

impl<I> ImagePyramid<I> {
    /// Levels ordered coarsest first.
    pub fn levels(&self) -> &[(I, BinaryMask)] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn coarsest(&self) -> &(I, BinaryMask) {
        &self.levels[0]
    }

    pub fn finest(&self) -> &(I, BinaryMask) {
        self.levels.last().expect("pyramid has at least one level")
    }

    pub fn into_levels(self) -> Vec<(I, BinaryMask)> {
        self.levels
    }
}

/// Halves until the next level's smaller side would drop below `min_dim`.
pub fn build_pyramid<I: Downsample + Clone>(
    content: &I,
    mask: &BinaryMask,
    min_dim: usize,
) -> Result<ImagePyramid<I>> {
    if min_dim < 8 {
        return Err(Error::InvalidParameter(format!("min_dim must be >= 8, got {min_dim}")));
    }
    if content.dimensions() != mask.dimensions() {
        return Err(Error::InvalidInput(format!(
            "mask {:?} does not match content {:?}",
            mask.dimensions(),
            content.dimensions()
        )));
    }
    let mut levels = vec![(content.clone(), mask.clone())];
    loop {
        let (w, h) = levels.last().unwrap().0.dimensions();
        if w.div_ceil(2).min(h.div_ceil(2)) < min_dim || w.min(h) < 2 {
            break;
        }
        let (img, m) = levels.last().unwrap();
        let next = (img.downsample(), m.downsample_any());
        levels.push(next);
    }
    levels.reverse();
    Ok(ImagePyramid { levels })
}
