//! Producing a façade image from a completed label map and a style pair.
//!
//! Three backends share one contract: the output always has the content
//! label map's dimensions and three channels.
//!
//! The external backend runs
//! `<program> [args..] --content-labels <png> --style <png> --style-labels <png> --seed <u64> --out <png>`
//! inside a private temporary directory. Label PNGs are RGB renderings in
//! palette colors. The command must exit 0 and leave an 8-bit PNG at
//! `--out` of the content-label size.

use std::path::PathBuf;
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quilting::{largest_class_square, quilt, QuiltParams};
use crate::raster::io::{load_png, save_png};
use crate::raster::{ClassId, LabelMap, RasterImage};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct SynthesisRequest<T> {
    pub content_labels: LabelMap,
    pub style_image: RasterImage<T>,
    pub style_labels: LabelMap,
    pub seed: u64,
}

impl<T: Scalar> SynthesisRequest<T> {
    pub fn validate(&self) -> Result<()> {
        if self.style_image.dimensions() != self.style_labels.dimensions() {
            return Err(Error::InvalidInput(format!(
                "style image is {}x{} but style labels are {}x{}",
                self.style_image.width(),
                self.style_image.height(),
                self.style_labels.width(),
                self.style_labels.height()
            )));
        }
        if self.style_image.channels() != 3 {
            return Err(Error::InvalidInput("style image must be RGB".into()));
        }
        if self.content_labels.palette() != self.style_labels.palette() {
            return Err(Error::InvalidInput("content and style labels use different palettes".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BackendKind {
    ExternalCommand {
        program: PathBuf,
        #[serde(default)]
        args: Vec<String>,
        #[serde(default)]
        keep_workspace: bool,
    },
    #[default]
    QuiltOnly,
    Passthrough,
}

impl BackendKind {
    pub fn name(&self) -> &'static str {
        match self {
            BackendKind::ExternalCommand { .. } => "external-command",
            BackendKind::QuiltOnly => "quilt-only",
            BackendKind::Passthrough => "passthrough",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SynthesisNotes {
    pub backend: String,
    /// Classes painted with a mean color instead of quilted texture.
    pub mean_color_classes: Vec<ClassId>,
    /// Set when `keep_workspace` retained the external workspace.
    pub workspace: Option<PathBuf>,
    pub diagnostics: String,
}

pub fn synthesize<T: Scalar>(
    req: &SynthesisRequest<T>,
    backend: &BackendKind,
    quilt_params: &QuiltParams,
) -> Result<(RasterImage<T>, SynthesisNotes)> {
    req.validate()?;
    let (img, mut notes) = match backend {
        BackendKind::Passthrough => (req.content_labels.render(), SynthesisNotes::default()),
        BackendKind::QuiltOnly => quilt_only(req, quilt_params)?,
        BackendKind::ExternalCommand {
            program,
            args,
            keep_workspace,
        } => external(req, program, args, *keep_workspace)?,
    };
    notes.backend = backend.name().to_string();
    debug_assert_eq!(img.dimensions(), req.content_labels.dimensions());
    Ok((img, notes))
}

fn mean_color<T: Scalar>(img: &RasterImage<T>, pick: impl Fn(usize, usize) -> bool) -> Option<[T; 3]> {
    let mut sum = [T::zero(); 3];
    let mut n = 0usize;
    for y in 0..img.height() {
        for x in 0..img.width() {
            if pick(x, y) {
                for (s, &v) in sum.iter_mut().zip(img.pixel(x, y)) {
                    *s = *s + v;
                }
                n += 1;
            }
        }
    }
    (n > 0).then(|| sum.map(|s| s / T::of_usize(n)))
}

/// Smallest exemplar side worth quilting from.
const MIN_EXEMPLAR: usize = 4;

fn quilt_only<T: Scalar>(req: &SynthesisRequest<T>, base: &QuiltParams) -> Result<(RasterImage<T>, SynthesisNotes)> {
    let content = &req.content_labels;
    let (w, h) = content.dimensions();
    let mut out = RasterImage::new(w, h, 3);
    let mut notes = SynthesisNotes::default();
    let global = mean_color(&req.style_image, |_, _| true).unwrap_or([T::zero(); 3]);
    for entry in content.palette().entries() {
        let class = entry.id;
        let mask = content.mask_of(class);
        let Some((bx, by, bw, bh)) = mask.bounding_box() else {
            continue;
        };
        let square = largest_class_square(&req.style_labels, class).filter(|s| s.2 >= MIN_EXEMPLAR);
        let texture = match square {
            Some((sx, sy, side)) => {
                let n = base.patch_n.min(side);
                let params = QuiltParams {
                    patch_n: n,
                    overlap: base.overlap.min((n - 1) / 2),
                    tolerance: base.tolerance,
                    seed: req.seed ^ base.seed ^ (u64::from(class) + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                };
                let exemplar = req.style_image.crop(sx, sy, side, side)?;
                Some(quilt(&exemplar, bw.max(n), bh.max(n), &params)?.0)
            }
            None => None,
        };
        let fill = if texture.is_none() {
            notes.mean_color_classes.push(class);
            let own = mean_color(&req.style_image, |x, y| req.style_labels.get(x, y) == class);
            if own.is_none() {
                log::warn!("class {} absent from style labels; using the global mean color", entry.name);
            }
            own.unwrap_or(global)
        } else {
            [T::zero(); 3]
        };
        for y in by..by + bh {
            for x in bx..bx + bw {
                if mask.get(x, y) {
                    match &texture {
                        Some(t) => out.pixel_mut(x, y).copy_from_slice(t.pixel(x - bx, y - by)),
                        None => out.pixel_mut(x, y).copy_from_slice(&fill),
                    }
                }
            }
        }
    }
    Ok((out, notes))
}

fn external<T: Scalar>(
    req: &SynthesisRequest<T>,
    program: &PathBuf,
    args: &[String],
    keep: bool,
) -> Result<(RasterImage<T>, SynthesisNotes)> {
    let dir = tempfile::Builder::new()
        .prefix("facade-synth-")
        .tempdir()
        .map_err(|e| Error::io(std::env::temp_dir(), e))?;
    let content = dir.path().join("content_labels.png");
    let style = dir.path().join("style.png");
    let style_labels = dir.path().join("style_labels.png");
    let out_path = dir.path().join("out.png");
    save_png(&req.content_labels.render::<T>(), &content)?;
    save_png(&req.style_image, &style)?;
    save_png(&req.style_labels.render::<T>(), &style_labels)?;

    let output = Command::new(program)
        .args(args)
        .arg("--content-labels")
        .arg(&content)
        .arg("--style")
        .arg(&style)
        .arg("--style-labels")
        .arg(&style_labels)
        .arg("--seed")
        .arg(req.seed.to_string())
        .arg("--out")
        .arg(&out_path)
        .current_dir(dir.path())
        .output()
        .map_err(|e| Error::Backend {
            message: format!("could not start {}: {e}", program.display()),
            diagnostics: String::new(),
        })?;
    let diagnostics = format!(
        "{}{}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    let fail = |message: String| Error::Backend {
        message,
        diagnostics: diagnostics.clone(),
    };
    if !output.status.success() {
        return Err(fail(format!("{} exited with {}", program.display(), output.status)));
    }
    if !out_path.exists() {
        return Err(fail(format!("{} produced no output image", program.display())));
    }
    let img: RasterImage<T> = load_png(&out_path).map_err(|e| fail(format!("unreadable output: {e}")))?;
    if img.dimensions() != req.content_labels.dimensions() {
        return Err(fail(format!(
            "output is {}x{}, expected {}x{}",
            img.width(),
            img.height(),
            req.content_labels.width(),
            req.content_labels.height()
        )));
    }
    let img = if img.channels() == 1 {
        RasterImage::from_fn(img.width(), img.height(), 3, |x, y, _| img.get(x, y, 0))
    } else {
        img
    };
    let workspace = keep.then(|| dir.keep());
    Ok((
        img,
        SynthesisNotes {
            backend: String::new(),
            mean_color_classes: Vec::new(),
            workspace,
            diagnostics,
        },
    ))
}
