use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use facade_core::raster::io::{save_label_map, save_png};
use facade_core::raster::{LabelMap, Palette, RasterImage};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_facade-forge"));
    c.env_remove("FACADE_FORGE_SEED");
    c
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn grid(w: usize, h: usize, blob: Option<(f64, f64, f64)>) -> LabelMap {
    LabelMap::from_fn(w, h, Palette::facade(), |x, y| {
        if let Some((cx, cy, r)) = blob {
            if (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= r * r {
                return Palette::VEGETATION;
            }
        }
        if (2..6).contains(&(x % 8)) && (2..6).contains(&(y % 8)) {
            Palette::WINDOW
        } else {
            Palette::WALL
        }
    })
    .unwrap()
}

fn textured(labels: &LabelMap) -> RasterImage<f64> {
    let base = labels.render::<f64>();
    RasterImage::from_fn(labels.width(), labels.height(), 3, |x, y, c| {
        let wobble = ((x * 7 + y * 13 + c * 5) % 17) as f64 / 17.0;
        0.6 * base.get(x, y, c) + 0.2 * wobble + 0.1
    })
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let style = grid(48, 48, None);
        save_label_map(&style, root.join("style_labels.png")).unwrap();
        save_png(&textured(&style), root.join("style.png")).unwrap();
        save_label_map(&grid(48, 48, Some((22.0, 26.0, 7.0))), root.join("occluded.png")).unwrap();
        save_label_map(&grid(48, 48, None), root.join("manual.png")).unwrap();
        Self { _dir: dir, root }
    }

    fn p(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

fn repair(fx: &Fixture, mode: &str, labels: &str, out: &Path, extra: &[&str]) -> Output {
    let mut c = bin();
    c.args(["repair", mode, "--labels"])
        .arg(fx.p(labels))
        .arg("--style")
        .arg(fx.p("style.png"))
        .arg("--style-labels")
        .arg(fx.p("style_labels.png"))
        .arg("--out-dir")
        .arg(out)
        .args(extra);
    run(&mut c)
}

#[test]
fn maps_writes_all_outputs() {
    let fx = Fixture::new();
    let prefix = fx.p("m");
    let out = run(bin().args(["maps", "--input"]).arg(fx.p("style.png")).arg("--out-prefix").arg(&prefix));
    assert!(out.status.success());
    for s in ["low.png", "high.png", "corner.png", "spectrum.png", "maps.json"] {
        assert!(fx.p(&format!("m_{s}")).exists(), "{s}");
    }
    let side: serde_json::Value = serde_json::from_slice(&std::fs::read(fx.p("m_maps.json")).unwrap()).unwrap();
    assert!(side["corner_max"].as_f64().unwrap() > 0.0);
}

#[test]
fn metrics_identical_images() {
    let fx = Fixture::new();
    let out = run(bin()
        .args(["metrics", "--a"])
        .arg(fx.p("style.png"))
        .arg("--b")
        .arg(fx.p("style.png"))
        .arg("--out")
        .arg(fx.p("r.json")));
    assert!(out.status.success());
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(fx.p("r.json")).unwrap()).unwrap();
    assert_eq!(r["psnr"], "inf");
    assert!((r["ssim"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn quilt_writes_texture_and_plan() {
    let fx = Fixture::new();
    let out = run(bin()
        .args(["quilt", "--source"])
        .arg(fx.p("style.png"))
        .args(["--region", "0,0,40,40", "--out-size", "70x50", "--patch", "16", "--overlap", "4", "--seed", "3"])
        .arg("--out")
        .arg(fx.p("tex.png"))
        .arg("--plan")
        .arg(fx.p("plan.json")));
    assert!(out.status.success());
    let plan: serde_json::Value = serde_json::from_slice(&std::fs::read(fx.p("plan.json")).unwrap()).unwrap();
    assert_eq!(plan["output_width"], 70);
    assert!(!plan["placements"].as_array().unwrap().is_empty());
}

#[test]
fn complete_labels_with_occluders() {
    let fx = Fixture::new();
    let out = run(bin()
        .args(["complete", "--labels"])
        .arg(fx.p("occluded.png"))
        .arg("--out")
        .arg(fx.p("done.png"))
        .arg("--report")
        .arg(fx.p("energy.json")));
    assert!(out.status.success());
    assert!(fx.p("done.png").exists() && fx.p("done.json").exists());
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(fx.p("energy.json")).unwrap()).unwrap();
    assert!(!r["levels"].as_array().unwrap().is_empty());
}

#[test]
fn repair_paths_and_env_seed_determinism() {
    let fx = Fixture::new();
    let a = fx.p("a");
    let b = fx.p("b");
    for dir in [&a, &b] {
        let mut c = bin();
        c.env("FACADE_FORGE_SEED", "11");
        c.args(["repair", "occlusion", "--labels"])
            .arg(fx.p("occluded.png"))
            .arg("--texture")
            .arg(fx.p("style.png"))
            .arg("--style")
            .arg(fx.p("style.png"))
            .arg("--style-labels")
            .arg(fx.p("style_labels.png"))
            .args(["--backend", "quilt-only", "--force-quilt", "--exemplar", "0,0,24,24"])
            .arg("--out-dir")
            .arg(dir);
        assert!(run(&mut c).status.success());
    }
    for f in ["labels.png", "mask.png", "synthesized.png", "final.png"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 11);
    assert_eq!(report["schema_version"], 1);

    let m = fx.p("m");
    assert!(repair(&fx, "missing", "manual.png", &m, &["--backend", "passthrough"]).status.success());
    assert!(m.join("final.png").exists());
}

#[test]
fn exit_codes() {
    let fx = Fixture::new();
    let missing = run(bin().args(["metrics", "--a", "/nonexistent.png", "--b", "/nonexistent.png", "--out"]).arg(fx.p("x.json")));
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(run(bin().args(["quilt", "--bogus"])).status.code(), Some(2));

    let all_veg = LabelMap::from_fn(16, 16, Palette::facade(), |_, _| Palette::VEGETATION).unwrap();
    save_label_map(&all_veg, fx.p("veg.png")).unwrap();
    let out = repair(&fx, "occlusion", "veg.png", &fx.p("d"), &[]);
    assert_eq!(out.status.code(), Some(4));

    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        let gen = fx.p("gen.sh");
        std::fs::write(&gen, "#!/bin/sh\necho generator exploded >&2\nexit 7\n").unwrap();
        std::fs::set_permissions(&gen, std::fs::Permissions::from_mode(0o755)).unwrap();
        let out = repair(&fx, "missing", "manual.png", &fx.p("e"), &["--generator", gen.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(3));
        assert!(String::from_utf8_lossy(&out.stderr).contains("generator exploded"));
    }

    let bad_env = run(bin()
        .env("FACADE_FORGE_SEED", "abc")
        .args(["repair", "missing", "--labels"])
        .arg(fx.p("manual.png"))
        .arg("--style")
        .arg(fx.p("style.png"))
        .arg("--style-labels")
        .arg(fx.p("style_labels.png"))
        .arg("--out-dir")
        .arg(fx.p("f")));
    assert_eq!(bad_env.status.code(), Some(2));
}
