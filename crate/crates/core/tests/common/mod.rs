#![allow(dead_code)]

use facade_core::pipeline::StylePair;
use facade_core::quilting::QuiltPlan;
use facade_core::raster::{BinaryMask, ClassId, LabelMap, Palette, RasterImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Wall with a regular grid of `period/2`-sided windows.
pub fn window_grid(w: usize, h: usize, period: usize) -> LabelMap {
    LabelMap::from_fn(w, h, Palette::facade(), |x, y| {
        let (a, b) = (period / 4, period / 4 + period / 2);
        if (a..b).contains(&(x % period)) && (a..b).contains(&(y % period)) {
            Palette::WINDOW
        } else {
            Palette::WALL
        }
    })
    .unwrap()
}

/// Window grid with a vegetation disc.
pub fn occluded_facade(w: usize, h: usize, period: usize, cx: f64, cy: f64, r: f64) -> LabelMap {
    let mut l = window_grid(w, h, period);
    for y in 0..h {
        for x in 0..w {
            if (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= r * r {
                l.set(x, y, Palette::VEGETATION);
            }
        }
    }
    l
}

/// Class color plus 8-bit-quantized noise.
pub fn textured(labels: &LabelMap, seed: u64) -> RasterImage<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = labels.render::<f64>();
    RasterImage::from_fn(labels.width(), labels.height(), 3, |x, y, c| {
        let v = 0.6 * base.get(x, y, c) + 0.2 + rng.random_range(-0.15..0.15);
        (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
    })
}

pub fn style(w: usize, h: usize, period: usize, seed: u64) -> StylePair<f64> {
    let labels = window_grid(w, h, period);
    StylePair {
        image: textured(&labels, seed),
        labels,
    }
}

pub fn random_labels(w: usize, h: usize, classes: &[ClassId], rng: &mut ChaCha8Rng) -> LabelMap {
    LabelMap::from_fn(w, h, Palette::facade(), |_, _| classes[rng.random_range(0..classes.len())]).unwrap()
}

pub fn accuracy(got: &LabelMap, truth: &LabelMap, mask: &BinaryMask) -> f64 {
    let px = mask.set_pixels();
    let ok = px.iter().filter(|&&(x, y)| got.get(x, y) == truth.get(x, y)).count();
    ok as f64 / px.len() as f64
}

/// Straightforward Harris: every sum written out, mirrored borders.
pub fn reference_harris(img: &[Vec<f64>], k: f64, omega: f64) -> Vec<Vec<f64>> {
    let h = img.len() as isize;
    let w = img[0].len() as isize;
    let mirror = |i: isize, n: isize| -> usize {
        let mut i = i;
        if i < 0 {
            i = -i;
        }
        if i >= n {
            i = 2 * (n - 1) - i;
        }
        i as usize
    };
    let at = |x: isize, y: isize| img[mirror(y, h)][mirror(x, w)];
    let sx = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
    let sy = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
    let mut ix = vec![vec![0.0; w as usize]; h as usize];
    let mut iy = ix.clone();
    for y in 0..h {
        for x in 0..w {
            let (mut gx, mut gy) = (0.0, 0.0);
            for j in -1..=1isize {
                for i in -1..=1isize {
                    let v = at(x + i, y + j);
                    gx += sx[(j + 1) as usize][(i + 1) as usize] * v;
                    gy += sy[(j + 1) as usize][(i + 1) as usize] * v;
                }
            }
            ix[y as usize][x as usize] = gx;
            iy[y as usize][x as usize] = gy;
        }
    }
    let mut g = [[0.0; 5]; 5];
    let mut total = 0.0;
    for j in 0..5 {
        for i in 0..5 {
            let (dx, dy) = (i as f64 - 2.0, j as f64 - 2.0);
            g[j][i] = (-(dx * dx + dy * dy) / 2.0).exp();
            total += g[j][i];
        }
    }
    let mut out = vec![vec![0.0; w as usize]; h as usize];
    for y in 0..h {
        for x in 0..w {
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for j in -2..=2isize {
                for i in -2..=2isize {
                    let (px, py) = (mirror(x + i, w), mirror(y + j, h));
                    let wgt = g[(j + 2) as usize][(i + 2) as usize] / total;
                    a += wgt * ix[py][px] * ix[py][px];
                    b += wgt * iy[py][px] * iy[py][px];
                    c += wgt * ix[py][px] * iy[py][px];
                }
            }
            let r = a * b - c * c - k * (a + b) * (a + b);
            out[y as usize][x as usize] = omega * r.max(0.0);
        }
    }
    out
}

/// Per-window SSIM with centered second moments.
pub fn ssim_oracle(a: &RasterImage<f64>, b: &RasterImage<f64>) -> f64 {
    let mut g = [[0.0; 11]; 11];
    let mut s = 0.0;
    for j in 0..11 {
        for i in 0..11 {
            let (dx, dy) = (i as f64 - 5.0, j as f64 - 5.0);
            g[j][i] = (-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5)).exp();
            s += g[j][i];
        }
    }
    let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
    let mut per_channel = Vec::new();
    for c in 0..a.channels() {
        let mut acc = Vec::new();
        for y0 in 0..=a.height() - 11 {
            for x0 in 0..=a.width() - 11 {
                let pa = |i: usize, j: usize| a.get(x0 + i, y0 + j, c) * 255.0;
                let pb = |i: usize, j: usize| b.get(x0 + i, y0 + j, c) * 255.0;
                let (mut ma, mut mb) = (0.0, 0.0);
                for j in 0..11 {
                    for i in 0..11 {
                        ma += g[j][i] / s * pa(i, j);
                        mb += g[j][i] / s * pb(i, j);
                    }
                }
                let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
                for j in 0..11 {
                    for i in 0..11 {
                        let wgt = g[j][i] / s;
                        va += wgt * (pa(i, j) - ma).powi(2);
                        vb += wgt * (pb(i, j) - mb).powi(2);
                        cov += wgt * (pa(i, j) - ma) * (pb(i, j) - mb);
                    }
                }
                acc.push((2.0 * ma * mb + c1) * (2.0 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2)));
            }
        }
        per_channel.push(acc.iter().sum::<f64>() / acc.len() as f64);
    }
    per_channel.iter().sum::<f64>() / per_channel.len() as f64
}

/// Every monotone path, by explicit enumeration.
pub fn brute_min_path(e: &[f64], w: usize, h: usize) -> f64 {
    fn go(e: &[f64], w: usize, h: usize, y: usize, x: usize, acc: f64, best: &mut f64) {
        let acc = acc + e[y * w + x];
        if y + 1 == h {
            *best = best.min(acc);
            return;
        }
        for nx in [x as isize - 1, x as isize, x as isize + 1] {
            if nx >= 0 && (nx as usize) < w {
                go(e, w, h, y + 1, nx as usize, acc, best);
            }
        }
    }
    let mut best = f64::INFINITY;
    for x in 0..w {
        go(e, w, h, 0, x, 0.0, &mut best);
    }
    best
}

/// Replays a plan incrementally and checks each seam against the straight
/// centre cut on the canvas state it was computed from.
pub fn audit_seams(src: &RasterImage<f64>, plan: &QuiltPlan) {
    let (n, ov) = (plan.patch_n, plan.overlap);
    let cw = plan.placements.iter().map(|p| p.x + n).max().unwrap();
    let chh = plan.placements.iter().map(|p| p.y + n).max().unwrap();
    let mut canvas = RasterImage::<f64>::new(cw, chh, 3);
    for p in &plan.placements {
        if let Some(seam) = &p.left_seam {
            let mut e = Vec::new();
            for j in 0..n {
                for i in 0..ov {
                    let mut s = 0.0;
                    for c in 0..3 {
                        s += (canvas.get(p.x + i, p.y + j, c) - src.get(p.source_x + i, p.source_y + j, c)).powi(2);
                    }
                    e.push(s);
                }
            }
            let straight: f64 = (0..n).map(|j| e[j * ov + ov / 2]).sum();
            assert!(seam.cost <= straight + 1e-9);
            assert!(seam.is_monotone(ov) && seam.cuts.len() == n);
        }
        if let Some(seam) = &p.top_seam {
            let mut e = Vec::new();
            for i in 0..n {
                for j in 0..ov {
                    let mut s = 0.0;
                    for c in 0..3 {
                        s += (canvas.get(p.x + i, p.y + j, c) - src.get(p.source_x + i, p.source_y + j, c)).powi(2);
                    }
                    e.push(s);
                }
            }
            let straight: f64 = (0..n).map(|i| e[i * ov + ov / 2]).sum();
            assert!(seam.cost <= straight + 1e-9);
            assert!(seam.is_monotone(ov) && seam.cuts.len() == n);
        }
        for j in 0..n {
            for i in 0..n {
                if p.owns(i, j) {
                    canvas.pixel_mut(p.x + i, p.y + j).copy_from_slice(src.pixel(p.source_x + i, p.source_y + j));
                }
            }
        }
    }
}

/// 8-neighbourhood maxima with a positive value, strongest first.
pub fn local_maxima(map: &[Vec<f64>]) -> Vec<(usize, usize, f64)> {
    let h = map.len();
    let w = map[0].len();
    let mut peaks = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = map[y][x];
            if v <= 0.0 {
                continue;
            }
            let mut is_max = true;
            for j in y.saturating_sub(1)..(y + 2).min(h) {
                for i in x.saturating_sub(1)..(x + 2).min(w) {
                    if (i, j) != (x, y) && map[j][i] > v {
                        is_max = false;
                    }
                }
            }
            if is_max {
                peaks.push((x, y, v));
            }
        }
    }
    peaks.sort_by(|a, b| b.2.total_cmp(&a.2));
    peaks
}
