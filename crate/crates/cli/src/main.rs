use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use facade_core::completion::{complete_image, complete_labels, CompletionParams, DirectionVariant};
use facade_core::maps::{multi_domain_maps, HarrisParams, DEFAULT_FREQUENCY_SIGMA};
use facade_core::metrics::{metric_report, MetricParams};
use facade_core::pipeline::{derive_mask, repair, seed_from_env, RepairConfig, RepairInputs, StylePair};
use facade_core::quilting::{quilt, QuiltParams, Rect};
use facade_core::raster::io::{load_label_map, load_mask, load_palette, load_png, palette_sidecar, save_label_map, save_png, write_atomic};
use facade_core::raster::{ClassId, LabelMap, Palette, RasterImage};
use facade_core::synthesis::BackendKind;
use facade_core::{Error, Raster, Result};
use serde_json::json;

#[derive(Parser)]
#[command(name = "facade-forge", version, about = "Façade texture repair toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fill the void of a label map or image with direction-guided PatchMatch.
    Complete(CompleteArgs),
    /// Quilt a texture from a region of a source image.
    Quilt(QuiltArgs),
    /// Write frequency, corner, and spectrum maps of an image.
    Maps(MapsArgs),
    /// Compare two images and write a metric report.
    Metrics(MetricsArgs),
    /// Run the full repair pipeline.
    #[command(subcommand)]
    Repair(RepairCommand),
}

#[derive(Args)]
struct CompleteArgs {
    /// Label PNG to complete.
    #[arg(long, conflicts_with = "image", required_unless_present = "image")]
    labels: Option<PathBuf>,
    /// Ordinary image to complete.
    #[arg(long)]
    image: Option<PathBuf>,
    /// Palette JSON; defaults to the label sidecar, then the built-in façade palette.
    #[arg(long)]
    palette: Option<PathBuf>,
    /// Void mask PNG (nonzero = fill). Without it, occluder classes define the void.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Occluder class names used when no mask is given.
    #[arg(long, value_delimiter = ',', default_value = "vegetation")]
    occluders: Vec<String>,
    #[arg(long, default_value_t = 2)]
    dilation: usize,
    /// CompletionParams JSON.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    direction_variant: Option<DirectionVariant>,
    #[arg(long)]
    out: PathBuf,
    /// Per-level energy report JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct QuiltArgs {
    #[arg(long)]
    source: PathBuf,
    /// Exemplar rectangle `x,y,w,h`; defaults to the whole source.
    #[arg(long)]
    region: Option<Rect>,
    /// Output size `WxH`.
    #[arg(long, value_parser = parse_size)]
    out_size: (usize, usize),
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 36)]
    patch: usize,
    #[arg(long, default_value_t = 5)]
    overlap: usize,
    #[arg(long, default_value_t = 0.1)]
    tolerance: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    plan: Option<PathBuf>,
}

#[derive(Args)]
struct MapsArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out_prefix: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FREQUENCY_SIGMA)]
    sigma: f64,
    #[arg(long, default_value_t = 0.05)]
    k: f64,
    #[arg(long, default_value_t = 2)]
    trace_power: u32,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FREQUENCY_SIGMA)]
    sigma: f64,
}

#[derive(Subcommand)]
enum RepairCommand {
    /// Occluded labels: derive the mask, complete, synthesize.
    Occlusion {
        /// Occluded photo, used as the metric reference.
        #[arg(long)]
        texture: Option<PathBuf>,
        #[arg(long)]
        labels: PathBuf,
        #[command(flatten)]
        common: RepairArgs,
    },
    /// Manually annotated labels: synthesize directly.
    Missing {
        #[arg(long)]
        labels: PathBuf,
        #[command(flatten)]
        common: RepairArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendChoice {
    QuiltOnly,
    Passthrough,
}

#[derive(Args)]
struct RepairArgs {
    #[arg(long)]
    style: PathBuf,
    #[arg(long)]
    style_labels: PathBuf,
    #[arg(long)]
    palette: Option<PathBuf>,
    /// RepairConfig JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured backend.
    #[arg(long)]
    backend: Option<BackendChoice>,
    /// External generator executable; selects the external-command backend.
    #[arg(long, conflicts_with = "backend")]
    generator: Option<PathBuf>,
    #[arg(long)]
    keep_workspace: bool,
    #[arg(long)]
    force_quilt: bool,
    /// Exemplar rectangle `x,y,w,h` for the quilting fallback.
    #[arg(long)]
    exemplar: Option<Rect>,
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w = w.trim().parse().map_err(|_| format!("bad width in {s:?}"))?;
    let h = h.trim().parse().map_err(|_| format!("bad height in {s:?}"))?;
    Ok((w, h))
}

fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::Backend { .. } => 3,
        Error::DegenerateMask(_) => 4,
        Error::Io { .. } => 1,
        _ => 2,
    }
}

fn resolve_palette(explicit: Option<&Path>, labels: &Path) -> Result<Palette> {
    if let Some(p) = explicit {
        return load_palette(p);
    }
    let sidecar = palette_sidecar(labels);
    if sidecar.exists() {
        return load_palette(sidecar);
    }
    Ok(Palette::facade())
}

fn load_rgb(path: &Path) -> Result<Raster> {
    let img: Raster = load_png(path)?;
    Ok(if img.channels() == 1 {
        RasterImage::from_fn(img.width(), img.height(), 3, |x, y, _| img.get(x, y, 0))
    } else {
        img
    })
}

fn class_ids(names: &[String], palette: &Palette) -> Result<Vec<ClassId>> {
    names
        .iter()
        .filter(|n| !n.is_empty())
        .map(|n| palette.id_by_name(n).ok_or_else(|| Error::InvalidInput(format!("unknown class {n:?}"))))
        .collect()
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    write_atomic(path, &serde_json::to_vec_pretty(value)?)
}

fn effective_seed(flag: Option<u64>) -> Result<Option<u64>> {
    Ok(flag.or(seed_from_env()?))
}

fn run_complete(args: CompleteArgs) -> Result<()> {
    let mut params: CompletionParams = match &args.params {
        Some(p) => serde_json::from_slice(&std::fs::read(p).map_err(|_| Error::NotFound(p.clone()))?)?,
        None => CompletionParams::default(),
    };
    if let Some(seed) = effective_seed(args.seed)? {
        params.seed = seed;
    }
    if let Some(v) = args.direction_variant {
        params.direction_variant = v;
    }
    let report = if let Some(path) = &args.labels {
        let palette = resolve_palette(args.palette.as_deref(), path)?;
        let labels = load_label_map(path, &palette)?;
        let mask = match &args.mask {
            Some(m) => load_mask(m)?,
            None => derive_mask(&labels, &class_ids(&args.occluders, &palette)?, args.dilation)?,
        };
        let done = complete_labels::<f64>(&labels, &mask, &params)?;
        save_label_map(&done.labels, &args.out)?;
        done.result.report
    } else {
        let path = args.image.as_ref().expect("clap requires one input");
        let img: Raster = load_png(path)?;
        let mask_path = args
            .mask
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("--image needs --mask".into()))?;
        let done = complete_image(&img, &load_mask(mask_path)?, &params)?;
        save_png(&done.image, &args.out)?;
        done.report
    };
    if let Some(r) = &args.report {
        write_json(r, &report)?;
    }
    Ok(())
}

fn run_quilt(args: QuiltArgs) -> Result<()> {
    let source = load_rgb(&args.source)?;
    let exemplar = match args.region {
        Some(r) if !r.fits_in(source.width(), source.height()) => {
            return Err(Error::InvalidInput(format!("region {r:?} outside the source")));
        }
        Some(r) => source.crop(r.x, r.y, r.width, r.height)?,
        None => source,
    };
    let params = QuiltParams {
        patch_n: args.patch,
        overlap: args.overlap,
        tolerance: args.tolerance,
        seed: effective_seed(args.seed)?.unwrap_or(0),
    };
    let (out, plan) = quilt(&exemplar, args.out_size.0, args.out_size.1, &params)?;
    save_png(&out, &args.out)?;
    if let Some(p) = &args.plan {
        write_json(p, &plan)?;
    }
    Ok(())
}

fn normalized(img: &Raster) -> (Raster, f64, f64) {
    let (lo, hi) = img.min_max();
    let scale = if hi > lo { hi - lo } else { 1.0 };
    (img.map(|v| (v - lo) / scale), lo, scale)
}

fn run_maps(args: MapsArgs) -> Result<()> {
    let img: Raster = load_png(&args.input)?;
    let harris = HarrisParams {
        k: args.k,
        trace_power: args.trace_power,
        ..Default::default()
    };
    let maps = multi_domain_maps(&img, args.sigma, &harris)?;
    let prefix = args.out_prefix.to_string_lossy().into_owned();
    let path = |suffix: &str| PathBuf::from(format!("{prefix}_{suffix}"));
    save_png(&maps.frequency.low, path("low.png"))?;
    let (high, high_offset, high_scale) = normalized(&maps.frequency.high);
    save_png(&high, path("high.png"))?;
    let corner_max = maps.corners.max();
    let corner = maps.corners.values().map(|v| if corner_max > 0.0 { v / corner_max } else { 0.0 });
    save_png(&corner, path("corner.png"))?;
    let (spectrum, spectrum_min, spectrum_scale) = normalized(&maps.spectrum.centered());
    save_png(&spectrum, path("spectrum.png"))?;
    write_json(
        &path("maps.json"),
        &json!({
            "sigma": args.sigma,
            "harris": harris,
            // raw = png * scale + offset
            "high_offset": high_offset,
            "high_scale": high_scale,
            "corner_max": corner_max,
            "spectrum_offset": spectrum_min,
            "spectrum_scale": spectrum_scale,
            "spectrum_centered": true,
        }),
    )
}

fn run_metrics(args: MetricsArgs) -> Result<()> {
    let a: Raster = load_png(&args.a)?;
    let b: Raster = load_png(&args.b)?;
    let params = MetricParams {
        frequency_sigma: args.sigma,
        ..Default::default()
    };
    let report = metric_report(&a, &b, &params)?;
    write_json(&args.out, &report)
}

fn run_repair(cmd: RepairCommand) -> Result<()> {
    let (labels_path, texture, common) = match &cmd {
        RepairCommand::Occlusion { texture, labels, common } => (labels, texture.as_ref(), common),
        RepairCommand::Missing { labels, common } => (labels, None, common),
    };
    let mut config = match &common.config {
        Some(p) => RepairConfig::from_json_file(p)?,
        None => RepairConfig::default(),
    };
    if let Some(seed) = effective_seed(common.seed)? {
        config.seed = seed;
    }
    if let Some(dir) = &common.out_dir {
        config.output_dir = dir.clone();
    }
    match (common.backend, &common.generator) {
        (Some(BackendChoice::QuiltOnly), _) => config.backend = BackendKind::QuiltOnly,
        (Some(BackendChoice::Passthrough), _) => config.backend = BackendKind::Passthrough,
        (None, Some(program)) => {
            config.backend = BackendKind::ExternalCommand {
                program: program.clone(),
                args: Vec::new(),
                keep_workspace: common.keep_workspace,
            }
        }
        (None, None) => {}
    }
    if let BackendKind::ExternalCommand { keep_workspace, .. } = &mut config.backend {
        *keep_workspace |= common.keep_workspace;
    }
    config.force_quilt |= common.force_quilt;
    if common.exemplar.is_some() {
        config.exemplar_region = common.exemplar;
    }
    let palette = resolve_palette(common.palette.as_deref(), labels_path)?;
    let labels: LabelMap = load_label_map(labels_path, &palette)?;
    let style = StylePair {
        image: load_rgb(&common.style)?,
        labels: load_label_map(&common.style_labels, &palette)?,
    };
    let inputs = match &cmd {
        RepairCommand::Occlusion { .. } => RepairInputs::Occlusion {
            labels,
            texture: texture.map(|p| load_rgb(p)).transpose()?,
        },
        RepairCommand::Missing { .. } => RepairInputs::Missing { labels },
    };
    let report = repair(&config, &inputs, &style)?;
    println!("{}", report.outputs.report.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Complete(a) => run_complete(a),
        Command::Quilt(a) => run_quilt(a),
        Command::Maps(a) => run_maps(a),
        Command::Metrics(a) => run_metrics(a),
        Command::Repair(c) => run_repair(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Backend { diagnostics, .. } = e.root() {
                if !diagnostics.is_empty() {
                    eprintln!("{diagnostics}");
                }
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
