//! End-to-end repair: mask derivation, semantic completion, synthesis,
//! quality gate with quilting fallback, and a JSON run report.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::completion::{complete_labels, CompletionParams, CompletionReport};
use crate::error::{Error, Result};
use crate::maps::{HarrisParams, DEFAULT_FREQUENCY_SIGMA};
use crate::metrics::{metric_report, ssim, MetricParams, MetricReport, SSIM_WINDOW};
use crate::quilting::{composite_fallback, largest_class_square, QuiltParams, QuiltPlan, Rect};
use crate::raster::io::{save_label_map, save_mask, save_png, write_atomic};
use crate::raster::{BinaryMask, ClassId, LabelMap, Palette, RasterImage};
use crate::scalar::Scalar;
use crate::synthesis::{synthesize, BackendKind, SynthesisNotes, SynthesisRequest};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const SEED_ENV: &str = "FACADE_FORGE_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RepairConfig {
    pub occluder_classes: Vec<ClassId>,
    pub mask_dilation: usize,
    pub completion: CompletionParams,
    pub quilt: QuiltParams,
    pub harris: HarrisParams,
    pub frequency_sigma: f64,
    /// Quilt the wall when `1 − SSIM` exceeds this.
    pub gate_threshold: f64,
    pub force_quilt: bool,
    pub wall_class: ClassId,
    /// Exemplar for the fallback, in synthesized-image coordinates. When
    /// absent, the largest all-wall square of the completed labels is used.
    pub exemplar_region: Option<Rect>,
    pub backend: BackendKind,
    /// Overrides the seeds of the nested parameter blocks.
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RepairConfig {
    fn default() -> Self {
        Self {
            occluder_classes: vec![Palette::VEGETATION],
            mask_dilation: 2,
            completion: CompletionParams::default(),
            quilt: QuiltParams::default(),
            harris: HarrisParams::default(),
            frequency_sigma: DEFAULT_FREQUENCY_SIGMA,
            gate_threshold: 0.3,
            force_quilt: false,
            wall_class: Palette::WALL,
            exemplar_region: None,
            backend: BackendKind::default(),
            seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RepairConfig {
    pub fn validate(&self) -> Result<()> {
        self.completion.validate()?;
        self.quilt.validate()?;
        self.harris.validate()?;
        if !(self.frequency_sigma > 0.0) {
            return Err(Error::InvalidParameter("frequency sigma must be > 0".into()));
        }
        if !self.gate_threshold.is_finite() {
            return Err(Error::InvalidParameter("gate threshold must be finite".into()));
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    fn seeded_completion(&self) -> CompletionParams {
        CompletionParams {
            seed: self.seed,
            ..self.completion.clone()
        }
    }

    fn seeded_quilt(&self) -> QuiltParams {
        QuiltParams {
            seed: self.seed,
            ..self.quilt.clone()
        }
    }
}

/// Seed from `FACADE_FORGE_SEED`, if set.
pub fn seed_from_env() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::InvalidInput(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

/// Pixels of any occluder class, grown by a `(2·dilation+1)²` square.
pub fn derive_mask(labels: &LabelMap, occluders: &[ClassId], dilation: usize) -> Result<BinaryMask> {
    let (w, h) = labels.dimensions();
    let raw = BinaryMask::from_fn(w, h, |x, y| occluders.contains(&labels.get(x, y)));
    let mask = raw.dilate(dilation);
    if mask.is_full() && w * h > 0 {
        return Err(Error::DegenerateMask("occluders cover the whole label map".into()));
    }
    Ok(mask)
}

pub enum RepairInputs<T> {
    /// Occluded labels, optionally with the occluded photo for reference
    /// metrics.
    Occlusion {
        labels: LabelMap,
        texture: Option<RasterImage<T>>,
    },
    /// Complete, manually annotated labels.
    Missing { labels: LabelMap },
}

pub struct StylePair<T> {
    pub image: RasterImage<T>,
    pub labels: LabelMap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub millis: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateDecision {
    Accepted,
    Quilted,
    Forced,
    NoWall,
    /// The wall or exemplar is too small to score or quilt.
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub decision: GateDecision,
    /// `1 − SSIM` of the synthesized wall against the exemplar.
    pub quality: Option<f64>,
    pub threshold: f64,
    pub exemplar: Option<Rect>,
    pub patch_n: Option<usize>,
    pub warning: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputFiles {
    pub labels: Option<PathBuf>,
    pub mask: Option<PathBuf>,
    pub synthesized: Option<PathBuf>,
    pub final_image: Option<PathBuf>,
    pub quilt_plan: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub mode: String,
    pub seed: u64,
    pub backend: String,
    pub timings: Vec<StageTiming>,
    pub mask_pixels: usize,
    pub completion: Option<CompletionReport>,
    pub synthesis: SynthesisNotes,
    pub gate: GateReport,
    pub metrics_reference: Option<String>,
    pub metrics: Option<MetricReport>,
    pub outputs: OutputFiles,
}

struct Timer(Vec<StageTiming>);

impl Timer {
    fn run<R>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<R>) -> Result<R> {
        let start = Instant::now();
        let out = f().map_err(|e| e.in_stage(stage));
        self.0.push(StageTiming {
            stage: stage.to_string(),
            millis: start.elapsed().as_secs_f64() * 1e3,
        });
        if out.is_ok() {
            log::info!("stage {stage} done");
        }
        out
    }
}

/// Wall bounding-box crop of `synth` against the exemplar, top-left
/// aligned to their common size.
fn gate_quality<T: Scalar>(synth: &RasterImage<T>, wall_box: Rect, exemplar: Rect) -> Result<Option<f64>> {
    let w = wall_box.width.min(exemplar.width);
    let h = wall_box.height.min(exemplar.height);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Ok(None);
    }
    let a = synth.crop(wall_box.x, wall_box.y, w, h)?;
    let b = synth.crop(exemplar.x, exemplar.y, w, h)?;
    Ok(Some(1.0 - ssim(&a, &b)?))
}

struct GateOutcome<T> {
    image: RasterImage<T>,
    report: GateReport,
    plan: Option<QuiltPlan>,
}

fn apply_gate<T: Scalar>(synth: &RasterImage<T>, labels: &LabelMap, config: &RepairConfig) -> Result<GateOutcome<T>> {
    let threshold = config.gate_threshold;
    let keep = |decision, quality, exemplar, warning: Option<String>| {
        if let Some(w) = &warning {
            log::warn!("{w}");
        }
        GateOutcome {
            image: synth.clone(),
            report: GateReport {
                decision,
                quality,
                threshold,
                exemplar,
                patch_n: None,
                warning,
            },
            plan: None,
        }
    };
    let Some((bx, by, bw, bh)) = labels.mask_of(config.wall_class).bounding_box() else {
        return Ok(keep(GateDecision::NoWall, None, None, Some("no wall pixels; gate skipped".into())));
    };
    let exemplar = match config.exemplar_region {
        Some(r) => {
            if !r.fits_in(synth.width(), synth.height()) {
                return Err(Error::InvalidInput(format!("exemplar region {r:?} outside the image")));
            }
            r
        }
        None => {
            let (x, y, s) = largest_class_square(labels, config.wall_class).expect("wall present");
            Rect::new(x, y, s, s)
        }
    };
    let quality = gate_quality(synth, Rect::new(bx, by, bw, bh), exemplar)?;
    let quilt_wanted = config.force_quilt || quality.is_some_and(|q| q > threshold);
    if !quilt_wanted {
        let (decision, warning) = match quality {
            Some(_) => (GateDecision::Accepted, None),
            None => (GateDecision::Skipped, Some("wall or exemplar smaller than the SSIM window; gate skipped".into())),
        };
        return Ok(keep(decision, quality, Some(exemplar), warning));
    }
    let mut params = config.seeded_quilt();
    let n = params.patch_n.min(exemplar.width).min(exemplar.height);
    if n < 4 {
        let msg = format!("exemplar {}x{} too small to quilt", exemplar.width, exemplar.height);
        return Ok(keep(GateDecision::Skipped, quality, Some(exemplar), Some(msg)));
    }
    if n < params.patch_n {
        log::warn!("patch size reduced from {} to {n} to fit the exemplar", params.patch_n);
    }
    params.patch_n = n;
    params.overlap = params.overlap.min((n - 1) / 2);
    let out = composite_fallback(synth, labels, config.wall_class, exemplar, f64::INFINITY, threshold, &params)?;
    Ok(GateOutcome {
        image: out.image,
        report: GateReport {
            decision: if config.force_quilt && !quality.is_some_and(|q| q > threshold) {
                GateDecision::Forced
            } else {
                GateDecision::Quilted
            },
            quality,
            threshold,
            exemplar: Some(exemplar),
            patch_n: Some(n),
            warning: out.warning,
        },
        plan: out.plan,
    })
}

/// Runs the full repair and writes its outputs to `config.output_dir`.
/// Every file is written atomically, so a failing stage leaves the
/// outputs of earlier stages intact and no partial file behind.
pub fn repair<T: Scalar>(config: &RepairConfig, inputs: &RepairInputs<T>, style: &StylePair<T>) -> Result<RunReport> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).in_stage("output"))?;
    let mut timer = Timer(Vec::new());
    let mut outputs = OutputFiles::default();
    let (mode, labels, reference) = match inputs {
        RepairInputs::Occlusion { labels, texture } => ("occlusion", labels, texture.as_ref()),
        RepairInputs::Missing { labels } => ("missing", labels, None),
    };
    let mut mask_pixels = 0;
    let mut completion = None;
    let completed = match inputs {
        RepairInputs::Occlusion { .. } => {
            let mask = timer.run("mask", || derive_mask(labels, &config.occluder_classes, config.mask_dilation))?;
            mask_pixels = mask.count();
            let done = timer.run("completion", || complete_labels::<T>(labels, &mask, &config.seeded_completion()))?;
            let mask_path = dir.join("mask.png");
            save_mask(&mask, &mask_path).map_err(|e| e.in_stage("completion"))?;
            outputs.mask = Some(mask_path);
            completion = Some(done.result.report);
            done.labels
        }
        RepairInputs::Missing { labels } => labels.clone(),
    };
    let labels_path = dir.join("labels.png");
    save_label_map(&completed, &labels_path).map_err(|e| e.in_stage("completion"))?;
    outputs.labels = Some(labels_path);

    let request = SynthesisRequest {
        content_labels: completed.clone(),
        style_image: style.image.clone(),
        style_labels: style.labels.clone(),
        seed: config.seed,
    };
    let (synth, notes) = timer.run("synthesis", || synthesize(&request, &config.backend, &config.seeded_quilt()))?;
    let synth_path = dir.join("synthesized.png");
    save_png(&synth, &synth_path).map_err(|e| e.in_stage("synthesis"))?;
    outputs.synthesized = Some(synth_path);

    let gate = timer.run("gate", || apply_gate(&synth, &completed, config))?;
    if let Some(plan) = &gate.plan {
        let plan_path = dir.join("quilt_plan.json");
        write_atomic(&plan_path, &serde_json::to_vec_pretty(plan)?).map_err(|e| e.in_stage("gate"))?;
        outputs.quilt_plan = Some(plan_path);
    }
    let final_path = dir.join("final.png");
    save_png(&gate.image, &final_path).map_err(|e| e.in_stage("gate"))?;
    outputs.final_image = Some(final_path);

    let (metrics_reference, reference) = match reference {
        Some(t) if t.dimensions() == gate.image.dimensions() => (Some("texture".to_string()), Some(t)),
        _ if style.image.dimensions() == gate.image.dimensions() => (Some("style".to_string()), Some(&style.image)),
        _ => (None, None),
    };
    let metrics = match reference {
        Some(r) => {
            let params = MetricParams {
                frequency_sigma: config.frequency_sigma,
                harris: config.harris.clone(),
            };
            Some(timer.run("metrics", || metric_report(&gate.image, r, &params))?)
        }
        None => None,
    };
    let report_path = dir.join("report.json");
    outputs.report = Some(report_path.clone());
    let report = RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        mode: mode.to_string(),
        seed: config.seed,
        backend: config.backend.name().to_string(),
        timings: timer.0,
        mask_pixels,
        completion,
        synthesis: notes,
        gate: gate.report,
        metrics_reference,
        metrics,
        outputs,
    };
    write_atomic(&report_path, &serde_json::to_vec_pretty(&report)?).map_err(|e| e.in_stage("report"))?;
    Ok(report)
}
