use serde::{Deserialize, Serialize};

use super::image::RasterImage;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Semantic class id.
pub type ClassId = u8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaletteEntry {
    pub id: ClassId,
    pub name: String,
    pub color: [u8; 3],
}

/// Class id to color mapping. Entries are kept sorted by id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Palette {
    classes: Vec<PaletteEntry>,
}

impl Palette {
    pub const WINDOW: ClassId = 0;
    pub const WALL: ClassId = 1;
    pub const DOOR: ClassId = 2;
    pub const VEGETATION: ClassId = 3;
    pub const CORNICE: ClassId = 4;
    pub const BACKGROUND: ClassId = 5;

    pub fn new(mut classes: Vec<PaletteEntry>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::InvalidInput("palette is empty".into()));
        }
        classes.sort_by_key(|e| e.id);
        for (i, a) in classes.iter().enumerate() {
            for b in &classes[i + 1..] {
                if a.id == b.id {
                    return Err(Error::InvalidInput(format!("duplicate class id {}", a.id)));
                }
                if a.color == b.color {
                    return Err(Error::InvalidInput(format!(
                        "classes {} and {} share color {:?}",
                        a.id, b.id, a.color
                    )));
                }
            }
        }
        Ok(Self { classes })
    }

    /// The fixed façade palette.
    pub fn facade() -> Self {
        let e = |id, name: &str, color| PaletteEntry {
            id,
            name: name.to_string(),
            color,
        };
        Self::new(vec![
            e(Self::WINDOW, "window", [0, 0, 255]),
            e(Self::WALL, "wall", [255, 255, 0]),
            e(Self::DOOR, "door", [255, 128, 0]),
            e(Self::VEGETATION, "vegetation", [0, 255, 0]),
            e(Self::CORNICE, "cornice", [255, 0, 0]),
            e(Self::BACKGROUND, "background", [0, 0, 0]),
        ])
        .expect("built-in palette is valid")
    }

    pub fn entries(&self) -> &[PaletteEntry] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn entry(&self, id: ClassId) -> Option<&PaletteEntry> {
        self.classes.iter().find(|e| e.id == id)
    }

    pub fn contains(&self, id: ClassId) -> bool {
        self.entry(id).is_some()
    }

    pub fn color(&self, id: ClassId) -> Option<[u8; 3]> {
        self.entry(id).map(|e| e.color)
    }

    pub fn id_by_name(&self, name: &str) -> Option<ClassId> {
        self.classes
            .iter()
            .find(|e| e.name.eq_ignore_ascii_case(name))
            .map(|e| e.id)
    }

    pub fn id_by_color(&self, color: [u8; 3]) -> Option<ClassId> {
        self.classes.iter().find(|e| e.color == color).map(|e| e.id)
    }

    /// Class nearest to an RGB unit-float color; ties go to the lowest id.
    pub fn nearest<T: Scalar>(&self, rgb: &[T]) -> ClassId {
        let mut best = (T::infinity(), self.classes[0].id);
        for e in &self.classes {
            let d = (0..3)
                .map(|c| {
                    let diff = rgb[c] - T::of(e.color[c] as f64 / 255.0);
                    diff * diff
                })
                .sum::<T>();
            if d < best.0 {
                best = (d, e.id);
            }
        }
        best.1
    }
}

impl Default for Palette {
    fn default() -> Self {
        Self::facade()
    }
}

/// Per-pixel semantic classes with their palette.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    classes: Vec<ClassId>,
    palette: Palette,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, classes: Vec<ClassId>, palette: Palette) -> Result<Self> {
        if classes.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "label map has {} entries, expected {}",
                classes.len(),
                width * height
            )));
        }
        if let Some(bad) = classes.iter().find(|&&c| !palette.contains(c)) {
            return Err(Error::InvalidInput(format!("class {bad} missing from palette")));
        }
        Ok(Self {
            width,
            height,
            classes,
            palette,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        palette: Palette,
        mut f: impl FnMut(usize, usize) -> ClassId,
    ) -> Result<Self> {
        let mut classes = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                classes.push(f(x, y));
            }
        }
        Self::new(width, height, classes, palette)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> ClassId {
        self.classes[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, class: ClassId) {
        debug_assert!(self.palette.contains(class));
        self.classes[y * self.width + x] = class;
    }

    pub fn classes(&self) -> &[ClassId] {
        &self.classes
    }

    pub fn palette(&self) -> &Palette {
        &self.palette
    }

    pub fn mask_of(&self, class: ClassId) -> super::BinaryMask {
        super::BinaryMask::from_fn(self.width, self.height, |x, y| self.get(x, y) == class)
    }

    pub fn count_of(&self, class: ClassId) -> usize {
        self.classes.iter().filter(|&&c| c == class).count()
    }

    /// Renders the palette colors as a 3-channel unit-float image.
    pub fn render<T: Scalar>(&self) -> RasterImage<T> {
        let lut: Vec<(ClassId, [T; 3])> = self
            .palette
            .entries()
            .iter()
            .map(|e| (e.id, e.color.map(|v| T::of(v as f64 / 255.0))))
            .collect();
        RasterImage::from_fn(self.width, self.height, 3, |x, y, c| {
            let id = self.get(x, y);
            lut.iter().find(|(i, _)| *i == id).map(|(_, col)| col[c]).unwrap()
        })
    }
}

/// Assigns each pixel the palette class at minimum RGB distance.
pub fn snap_to_palette<T: Scalar>(img: &RasterImage<T>, palette: &Palette) -> Result<LabelMap> {
    if img.channels() != 3 {
        return Err(Error::InvalidInput("palette snapping needs an RGB image".into()));
    }
    if palette.is_empty() {
        return Err(Error::InvalidInput("palette is empty".into()));
    }
    let classes = img
        .data()
        .chunks_exact(3)
        .map(|p| palette.nearest(p))
        .collect();
    LabelMap::new(img.width(), img.height(), classes, palette.clone())
}
