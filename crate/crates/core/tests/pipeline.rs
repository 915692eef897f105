mod common;

use std::path::Path;

use common::{occluded_facade, style, window_grid};
use facade_core::pipeline::{derive_mask, repair, GateDecision, RepairConfig, RepairInputs};
use facade_core::quilting::QuiltParams;
use facade_core::raster::io::{load_label_map, load_png};
use facade_core::raster::{LabelMap, Palette, RasterImage};
use facade_core::synthesis::BackendKind;
use facade_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(dir: &Path, backend: BackendKind) -> RepairConfig {
    RepairConfig {
        backend,
        output_dir: dir.to_path_buf(),
        quilt: QuiltParams {
            patch_n: 12,
            overlap: 3,
            ..Default::default()
        },
        seed: 42,
        ..Default::default()
    }
}

#[test]
fn dilation_matches_neighbourhood_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..10 {
        let labels = LabelMap::from_fn(20, 15, Palette::facade(), |_, _| {
            if rng.random::<f64>() < 0.05 { Palette::VEGETATION } else { Palette::WALL }
        })
        .unwrap();
        for d in 0..3usize {
            let Ok(mask) = derive_mask(&labels, &[Palette::VEGETATION], d) else { continue };
            for y in 0..15usize {
                for x in 0..20usize {
                    let mut hit = false;
                    for j in y.saturating_sub(d)..=(y + d).min(14) {
                        for i in x.saturating_sub(d)..=(x + d).min(19) {
                            hit |= labels.get(i, j) == Palette::VEGETATION;
                        }
                    }
                    assert_eq!(mask.get(x, y), hit);
                }
            }
        }
    }
}

#[test]
fn missing_path_passthrough_renders_labels() {
    let dir = tempfile::tempdir().unwrap();
    let labels = window_grid(32, 32, 8);
    let report = repair(
        &config(dir.path(), BackendKind::Passthrough),
        &RepairInputs::Missing { labels: labels.clone() },
        &style(32, 32, 8, 1),
    )
    .unwrap();
    let fin: RasterImage<f64> = load_png(dir.path().join("final.png")).unwrap();
    assert_eq!(fin, labels.render());
    assert_eq!(report.mode, "missing");
    assert!(report.completion.is_none());
}

#[test]
fn empty_occluder_set_keeps_labels() {
    let dir = tempfile::tempdir().unwrap();
    let labels = occluded_facade(32, 32, 8, 16.0, 16.0, 5.0);
    let mut cfg = config(dir.path(), BackendKind::Passthrough);
    cfg.occluder_classes.clear();
    let report = repair(
        &cfg,
        &RepairInputs::Occlusion {
            labels: labels.clone(),
            texture: None,
        },
        &style(32, 32, 8, 1),
    )
    .unwrap();
    assert_eq!(report.mask_pixels, 0);
    let out = load_label_map(dir.path().join("labels.png"), &Palette::facade()).unwrap();
    assert_eq!(out.classes(), labels.classes());
}

#[test]
fn occlusion_fixture_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let labels = occluded_facade(64, 64, 8, 30.0, 34.0, 9.0);
    let st = style(64, 64, 8, 3);
    let mut cfg = config(dir.path(), BackendKind::QuiltOnly);
    // Dense grids leave no all-wall square large enough to score against.
    cfg.exemplar_region = Some(facade_core::quilting::Rect::new(0, 0, 24, 24));
    let report = repair(
        &cfg,
        &RepairInputs::Occlusion {
            labels: labels.clone(),
            texture: Some(st.image.clone()),
        },
        &st,
    )
    .unwrap();
    assert!(report.mask_pixels > 0);
    let comp = report.completion.as_ref().unwrap();
    for level in &comp.levels {
        for it in &level.iterations {
            assert!(it.energy_after <= it.energy_before + 1e-9);
        }
    }
    let out = load_label_map(dir.path().join("labels.png"), &Palette::facade()).unwrap();
    let mask = derive_mask(&labels, &[Palette::VEGETATION], 2).unwrap();
    for y in 0..64 {
        for x in 0..64 {
            if !mask.get(x, y) {
                assert_eq!(out.get(x, y), labels.get(x, y));
            }
            assert_ne!(out.get(x, y), Palette::VEGETATION);
        }
    }
    assert!(report.gate.quality.is_some());
    assert_eq!(report.metrics_reference.as_deref(), Some("texture"));
    let o = &report.outputs;
    for p in [&o.labels, &o.mask, &o.synthesized, &o.final_image, &o.report].into_iter().flatten() {
        assert!(p.exists(), "{}", p.display());
    }
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
}

#[test]
fn forced_quilt_keeps_non_wall_pixels() {
    let dir = tempfile::tempdir().unwrap();
    let labels = window_grid(64, 48, 16);
    let mut cfg = config(dir.path(), BackendKind::QuiltOnly);
    cfg.force_quilt = true;
    let report = repair(&cfg, &RepairInputs::Missing { labels: labels.clone() }, &style(64, 64, 16, 9)).unwrap();
    assert!(matches!(report.gate.decision, GateDecision::Forced | GateDecision::Quilted));
    assert!(report.outputs.quilt_plan.as_ref().unwrap().exists());
    let synth = std::fs::read(dir.path().join("synthesized.png")).unwrap();
    let synth: RasterImage<f64> = image_from_bytes(&synth);
    let fin: RasterImage<f64> = load_png(dir.path().join("final.png")).unwrap();
    for y in 0..48 {
        for x in 0..64 {
            if labels.get(x, y) != Palette::WALL {
                assert_eq!(fin.pixel(x, y), synth.pixel(x, y));
            }
        }
    }
}

fn image_from_bytes(bytes: &[u8]) -> RasterImage<f64> {
    let tmp = tempfile::NamedTempFile::with_suffix(".png").unwrap();
    std::fs::write(tmp.path(), bytes).unwrap();
    load_png(tmp.path()).unwrap()
}

#[test]
fn repeated_runs_are_byte_identical() {
    let labels = occluded_facade(48, 48, 8, 20.0, 26.0, 7.0);
    let st = style(48, 48, 8, 4);
    let mut files = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(dir.path(), BackendKind::QuiltOnly);
        cfg.force_quilt = true;
        repair(&cfg, &RepairInputs::Occlusion { labels: labels.clone(), texture: None }, &st).unwrap();
        let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
        files.push([read("labels.png"), read("mask.png"), read("synthesized.png"), read("final.png")]);
    }
    assert_eq!(files[0], files[1]);
}

#[cfg(unix)]
#[test]
fn backend_failure_keeps_completion_outputs() {
    use std::os::unix::fs::PermissionsExt;
    let dir = tempfile::tempdir().unwrap();
    let program = dir.path().join("broken.sh");
    std::fs::write(&program, "#!/bin/sh\necho nope >&2\nexit 1\n").unwrap();
    std::fs::set_permissions(&program, std::fs::Permissions::from_mode(0o755)).unwrap();
    let out = dir.path().join("out");
    let cfg = config(
        &out,
        BackendKind::ExternalCommand {
            program,
            args: vec![],
            keep_workspace: false,
        },
    );
    let labels = occluded_facade(32, 32, 8, 16.0, 16.0, 4.0);
    let err = repair(&cfg, &RepairInputs::Occlusion { labels, texture: None }, &style(32, 32, 8, 1)).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: "synthesis", .. }), "{err}");
    assert!(matches!(err.root(), Error::Backend { .. }));
    assert!(out.join("labels.png").exists());
    assert!(out.join("mask.png").exists());
    assert!(!out.join("synthesized.png").exists());
    assert!(!out.join("report.json").exists());
}

#[test]
fn fully_occluded_map_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let labels = LabelMap::from_fn(16, 16, Palette::facade(), |_, _| Palette::VEGETATION).unwrap();
    let err = repair(
        &config(dir.path(), BackendKind::Passthrough),
        &RepairInputs::Occlusion { labels, texture: None },
        &style(16, 16, 8, 1),
    )
    .unwrap_err();
    assert!(matches!(err.root(), Error::DegenerateMask(_)));
}
