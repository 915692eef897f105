use super::*;
use crate::raster::Palette;
use rand::{Rng, SeedableRng};

fn noise(w: usize, h: usize, seed: u64) -> RasterImage<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RasterImage::from_fn(w, h, 3, |_, _, _| rng.random::<f64>())
}

/// Exhaustive per-pixel optimum over every known source pixel.
fn oracle_offsets(model: &CostModel<'_, f64>) -> Vec<(Offset, f64)> {
    let known = model.void.invert().set_pixels();
    model
        .void
        .set_pixels()
        .into_iter()
        .map(|(x, y)| {
            let mut best = (Offset::ZERO, f64::INFINITY);
            for &(kx, ky) in &known {
                let v = Offset::new(kx as i32 - x as i32, ky as i32 - y as i32);
                let e = model.total((x, y), v);
                if e < best.1 {
                    best = (v, e);
                }
            }
            best
        })
        .collect()
}

fn grid_labels(w: usize, h: usize) -> LabelMap {
    LabelMap::from_fn(w, h, Palette::facade(), |x, y| {
        if (x % 8) >= 2 && (x % 8) < 6 && (y % 8) >= 2 && (y % 8) < 6 {
            Palette::WINDOW
        } else if y % 8 == 0 {
            Palette::CORNICE
        } else {
            Palette::WALL
        }
    })
    .unwrap()
}

#[test]
fn radius_schedule_halves() {
    assert_eq!(radius_schedule(256, 256), vec![256, 128, 64, 32, 16, 8, 4, 2, 1]);
    assert_eq!(radius_schedule(16, 10), vec![16, 8, 4, 2, 1]);
}

#[test]
fn optimal_field_is_fixed_under_propagation_and_search() {
    let img = noise(16, 16, 1);
    let void = BinaryMask::from_rect(16, 16, 6, 6, 4, 4);
    let dist = distance_to_boundary(&void).unwrap();
    let params = CompletionParams::default();
    let model = CostModel::new(&img, &void, &dist, &params);
    let best: Vec<Offset> = oracle_offsets(&model).into_iter().map(|(v, _)| v).collect();
    let mut nnf = NearestNeighborField::from_offsets(&model, best.clone());
    assert_eq!(propagate(&mut nnf, &model, ScanOrder::Forward), 0);
    assert_eq!(propagate(&mut nnf, &model, ScanOrder::Reverse), 0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    assert_eq!(random_search_pass(&mut nnf, &model, &mut rng), 0);
    assert_eq!(nnf.offsets(), best.as_slice());
}

#[test]
fn neighbour_offset_adopted_in_one_pass() {
    // Two horizontally adjacent void pixels; the right one holds the
    // left one's exhaustive optimum.
    let img = noise(20, 20, 8);
    let mut void = BinaryMask::new(20, 20);
    void.set(9, 10, true);
    void.set(10, 10, true);
    let dist = distance_to_boundary(&void).unwrap();
    let params = CompletionParams::default();
    let model = CostModel::new(&img, &void, &dist, &params);
    let oracle = oracle_offsets(&model);
    let (best_left, _) = oracle[0];
    assert!(model.is_valid((10, 10), best_left), "fixture needs a shared valid offset");
    let worst = {
        let mut w = (Offset::ZERO, f64::NEG_INFINITY);
        for (x, y) in void.invert().set_pixels() {
            let v = Offset::new(x as i32 - 9, y as i32 - 10);
            let e = model.total((9, 10), v);
            if e > w.1 {
                w = (v, e);
            }
        }
        w.0
    };
    let mut nnf = NearestNeighborField::from_offsets(&model, vec![worst, best_left]);
    propagate(&mut nnf, &model, ScanOrder::Forward);
    assert_eq!(nnf.offset_at(9, 10), Some(best_left));
}

#[test]
fn passes_never_raise_energy() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for case in 0..20 {
        let w = rng.random_range(16..28);
        let h = rng.random_range(16..28);
        let img = noise(w, h, 100 + case);
        let hw = rng.random_range(2..7);
        let hh = rng.random_range(2..7);
        let void = BinaryMask::from_rect(w, h, rng.random_range(0..w - hw), rng.random_range(0..h - hh), hw, hh);
        let dist = distance_to_boundary(&void).unwrap();
        let params = CompletionParams {
            direction_variant: if case % 2 == 0 {
                DirectionVariant::AxisPenalty
            } else {
                DirectionVariant::Literal
            },
            ..Default::default()
        };
        let model = CostModel::new(&img, &void, &dist, &params);
        let mut nnf = NearestNeighborField::random(&model, &mut rng);
        let mut last = nnf.energy();
        let per_pixel_before = nnf.costs().to_vec();
        for it in 0..4 {
            propagate(&mut nnf, &model, ScanOrder::for_iteration(it));
            assert!(nnf.energy() <= last);
            last = nnf.energy();
            random_search_pass(&mut nnf, &model, &mut rng);
            assert!(nnf.energy() <= last);
            last = nnf.energy();
            assert!(nnf.is_valid(&model));
        }
        for (a, b) in nnf.costs().iter().zip(&per_pixel_before) {
            assert!(a <= b);
        }
        // Cached costs agree with a fresh evaluation.
        for ((&p, &v), &c) in nnf.targets().iter().zip(nnf.offsets()).zip(nnf.costs()) {
            assert!((model.total(p, v) - c).abs() < 1e-6);
        }
    }
}

#[test]
fn random_search_is_seed_deterministic() {
    let img = noise(24, 24, 5);
    let void = BinaryMask::from_rect(24, 24, 9, 9, 6, 6);
    let dist = distance_to_boundary(&void).unwrap();
    let params = CompletionParams::default();
    let model = CostModel::new(&img, &void, &dist, &params);
    let run = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut nnf = NearestNeighborField::random(&model, &mut rng);
        random_search_pass(&mut nnf, &model, &mut rng);
        nnf
    };
    assert_eq!(run(7), run(7));
    assert_ne!(run(7).offsets(), run(8).offsets());
}

#[test]
fn candidates_stay_in_buffer_and_radius() {
    let void = BinaryMask::from_rect(64, 64, 20, 20, 20, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = (30, 30);
    for r in [64, 16, 12] {
        for _ in 0..500 {
            if let Some((x, y)) = sample_candidate(&void, p, r, 3, &mut rng) {
                assert!(!void.get(x, y));
                assert!(x.abs_diff(p.0) <= r && y.abs_diff(p.1) <= r);
                assert!(x.abs_diff(p.0) <= 3 || y.abs_diff(p.1) <= 3);
            }
        }
    }
}

#[test]
fn upsampled_field_is_valid() {
    let img = noise(64, 64, 2);
    let void = BinaryMask::from_rect(64, 64, 20, 24, 17, 13);
    let params = CompletionParams::default();
    let coarse_img = crate::raster::Downsample::downsample(&img);
    let coarse_void = void.downsample_any();
    let cd = distance_to_boundary(&coarse_void).unwrap();
    let cm = CostModel::new(&coarse_img, &coarse_void, &cd, &params);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let coarse = NearestNeighborField::random(&cm, &mut rng);
    let fd = distance_to_boundary(&void).unwrap();
    let fm = CostModel::new(&img, &void, &fd, &params);
    let fine = NearestNeighborField::upsample(&coarse, &fm);
    assert_eq!(fine.len(), void.count());
    assert!(fine.is_valid(&fm));
}

#[test]
fn empty_mask_is_identity() {
    let img = noise(20, 20, 3);
    let out = complete_image(&img, &BinaryMask::new(20, 20), &CompletionParams::default()).unwrap();
    assert_eq!(out.image, img);
    assert!(out.report.levels.is_empty());
}

#[test]
fn all_void_is_degenerate() {
    let img = noise(20, 20, 3);
    let void = BinaryMask::from_fn(20, 20, |_, _| true);
    let err = complete_image(&img, &void, &CompletionParams::default()).unwrap_err();
    assert!(matches!(err, Error::DegenerateMask(_)));
}

#[test]
fn too_small_image_is_rejected() {
    let img = noise(5, 20, 3);
    let void = BinaryMask::from_rect(5, 20, 1, 1, 1, 1);
    assert!(matches!(
        complete_image(&img, &void, &CompletionParams::default()),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn known_pixels_preserved_and_deterministic() {
    let img = noise(48, 40, 9);
    let void = BinaryMask::from_rect(48, 40, 10, 12, 15, 9);
    let params = CompletionParams {
        seed: 77,
        min_level_dim: 16,
        ..Default::default()
    };
    let a = complete_image(&img, &void, &params).unwrap();
    let b = complete_image(&img, &void, &params).unwrap();
    assert_eq!(a.image, b.image);
    assert_eq!(a.nnf, b.nnf);
    assert_eq!(a.report, b.report);
    assert_eq!(a.report.levels.len(), 2);
    for (x, y) in void.invert().set_pixels() {
        assert_eq!(a.image.pixel(x, y), img.pixel(x, y));
    }
    for lvl in &a.report.levels {
        for it in &lvl.iterations {
            assert!(it.energy_after <= it.energy_before);
        }
    }
}

#[test]
fn grid_hole_close_to_exhaustive_oracle() {
    let labels = LabelMap::from_fn(16, 16, Palette::facade(), |x, y| {
        if x % 4 < 2 && y % 4 < 2 {
            Palette::WINDOW
        } else if y % 4 == 3 {
            Palette::DOOR
        } else {
            Palette::WALL
        }
    })
    .unwrap();
    let void = BinaryMask::from_rect(16, 16, 6, 5, 4, 4);
    let params = CompletionParams {
        seed: 1,
        ..Default::default()
    };
    let done = complete_labels::<f64>(&labels, &void, &params).unwrap();
    let dist = distance_to_boundary(&void).unwrap();
    let model = CostModel::new(&done.result.search_image, &void, &dist, &params);
    let oracle: f64 = oracle_offsets(&model).iter().map(|(_, e)| e).sum();
    let pm = done.result.nnf.energy();
    assert!(oracle <= pm + 1e-12);
    assert!(pm <= 1.05 * oracle + 1e-12, "patchmatch {pm} vs oracle {oracle}");
}

#[test]
fn label_completion_keeps_known_classes_and_palette() {
    let labels = grid_labels(40, 40);
    let void = BinaryMask::from_rect(40, 40, 13, 13, 10, 10);
    let done = complete_labels::<f32>(&labels, &void, &CompletionParams::default()).unwrap();
    for (x, y) in void.invert().set_pixels() {
        assert_eq!(done.labels.get(x, y), labels.get(x, y));
    }
    assert!(done.labels.classes().iter().all(|&c| labels.palette().contains(c)));
}
