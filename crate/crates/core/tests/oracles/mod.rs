//! Brute-force reference implementations used by the property and
//! acceptance tests. Deliberately naive: no sharing with the library code
//! beyond its public data types.
#![allow(dead_code)]

use std::collections::VecDeque;

use pollen_core::{BinaryMask, GrayImage};

/// Exhaustive Otsu: every level `t` in 0..=255 splitting `{v <= t}` from
/// `{v > t}`, between-class variance compared exactly in i128, first max wins.
/// `None` when fewer than two gray levels occur.
pub fn otsu(img: &GrayImage) -> Option<u8> {
    let mut hist = [0i128; 256];
    for &v in img.pixels() {
        hist[v as usize] += 1;
    }
    let n: i128 = hist.iter().sum();
    let total: i128 = hist.iter().enumerate().map(|(v, &c)| v as i128 * c).sum();
    let mut best: Option<(u8, i128, i128)> = None;
    for t in 0..=255usize {
        let n0: i128 = hist[..=t].iter().sum();
        let n1 = n - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let s0: i128 = hist[..=t].iter().enumerate().map(|(v, &c)| v as i128 * c).sum();
        // sigma_b^2 * N^2 = d^2 / (n0 * n1)
        let d = s0 * n - total * n0;
        let num = d * d;
        let den = n0 * n1;
        match best {
            Some((_, bn, bd)) if num * bd <= bn * den => {}
            _ => best = Some((t as u8, num, den)),
        }
    }
    best.map(|(t, _, _)| t)
}

/// Naive per-pixel windowed adaptive threshold using the 2-D product of the
/// given 1-D integer taps and edge replication. `darker` selects
/// `v < mean - c`, otherwise `v > mean - c`.
pub fn adaptive(img: &GrayImage, taps: &[i64], c: i64, darker: bool) -> BinaryMask {
    let (w, h) = img.dimensions();
    let r = (taps.len() / 2) as i64;
    let tsum: i64 = taps.iter().sum();
    let total = tsum * tsum;
    BinaryMask::from_fn(w, h, |x, y| {
        let mut s: i64 = 0;
        for (i, &ti) in taps.iter().enumerate() {
            for (j, &tj) in taps.iter().enumerate() {
                let sx = (x as i64 + j as i64 - r).clamp(0, w as i64 - 1);
                let sy = (y as i64 + i as i64 - r).clamp(0, h as i64 - 1);
                s += ti * tj * img.get(sx as usize, sy as usize) as i64;
            }
        }
        let v = img.get(x, y) as i64 * total;
        let t = s - c * total;
        if darker {
            v < t
        } else {
            v > t
        }
    })
}

pub fn neighbors(eight: bool) -> &'static [(i64, i64)] {
    if eight {
        &[(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)]
    } else {
        &[(0, -1), (-1, 0), (1, 0), (0, 1)]
    }
}

/// BFS region of pixels equal to `mask[seed]`, connected to `seed`.
pub fn bfs_region(mask: &BinaryMask, seed: (usize, usize), eight: bool) -> BinaryMask {
    let (w, h) = mask.dimensions();
    let value = mask.get(seed.0, seed.1);
    let mut seen = BinaryMask::filled(w, h, false);
    let mut q = VecDeque::from([seed]);
    seen.set(seed.0, seed.1, true);
    while let Some((x, y)) = q.pop_front() {
        for &(dx, dy) in neighbors(eight) {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            if mask.get(nx, ny) == value && !seen.get(nx, ny) {
                seen.set(nx, ny, true);
                q.push_back((nx, ny));
            }
        }
    }
    seen
}

/// Oracle component: sorted pixel list, area, inclusive bbox, centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub pixels: Vec<(usize, usize)>,
    pub bbox: (usize, usize, usize, usize),
    pub centroid: (f64, f64),
}

/// Foreground components by BFS, in order of their first raster pixel.
pub fn components(mask: &BinaryMask, eight: bool) -> Vec<Component> {
    let (w, h) = mask.dimensions();
    let mut taken = BinaryMask::filled(w, h, false);
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) || taken.get(x, y) {
                continue;
            }
            let region = bfs_region(mask, (x, y), eight);
            let mut pixels = Vec::new();
            for yy in 0..h {
                for xx in 0..w {
                    if region.get(xx, yy) {
                        taken.set(xx, yy, true);
                        pixels.push((xx, yy));
                    }
                }
            }
            let n = pixels.len() as f64;
            let bbox = (
                pixels.iter().map(|p| p.0).min().unwrap(),
                pixels.iter().map(|p| p.1).min().unwrap(),
                pixels.iter().map(|p| p.0).max().unwrap(),
                pixels.iter().map(|p| p.1).max().unwrap(),
            );
            let centroid = (
                pixels.iter().map(|p| p.0 as f64).sum::<f64>() / n,
                pixels.iter().map(|p| p.1 as f64).sum::<f64>() / n,
            );
            out.push(Component { pixels, bbox, centroid });
        }
    }
    out
}

/// Square-kernel dilation by direct neighborhood scan, outside = background.
pub fn dilate(mask: &BinaryMask, k: usize) -> BinaryMask {
    let r = (k / 2) as i64;
    let (w, h) = mask.dimensions();
    BinaryMask::from_fn(w, h, |x, y| {
        (-r..=r).any(|dy| {
            (-r..=r).any(|dx| {
                let (sx, sy) = (x as i64 + dx, y as i64 + dy);
                sx >= 0 && sy >= 0 && sx < w as i64 && sy < h as i64 && mask.get(sx as usize, sy as usize)
            })
        })
    })
}

/// Square-kernel erosion by direct neighborhood scan, outside = background.
pub fn erode(mask: &BinaryMask, k: usize) -> BinaryMask {
    let r = (k / 2) as i64;
    let (w, h) = mask.dimensions();
    BinaryMask::from_fn(w, h, |x, y| {
        (-r..=r).all(|dy| {
            (-r..=r).all(|dx| {
                let (sx, sy) = (x as i64 + dx, y as i64 + dy);
                sx >= 0 && sy >= 0 && sx < w as i64 && sy < h as i64 && mask.get(sx as usize, sy as usize)
            })
        })
    })
}

/// Background not 4-reachable from the border becomes foreground.
pub fn fill_holes(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = mask.dimensions();
    let mut outside = BinaryMask::filled(w, h, false);
    for y in 0..h {
        for x in 0..w {
            let border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
            if border && !mask.get(x, y) && !outside.get(x, y) {
                let r = bfs_region(mask, (x, y), false);
                for (o, &v) in outside.pixels_mut().iter_mut().zip(r.pixels()) {
                    *o |= v;
                }
            }
        }
    }
    outside.map(|&v| !v)
}

/// Dense projected-gradient (FISTA) solver for
/// `max sum(a) - 1/2 a'Qa`, `Q_ij = y_i y_j K_ij`, `0 <= a_i <= c_i`, `y'a = 0`.
/// Returns `(alpha, objective)`.
pub fn svm_dual_qp(k: &[Vec<f64>], y: &[f64], c: &[f64], iterations: usize) -> (Vec<f64>, f64) {
    let n = y.len();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| y[i] * y[j] * k[i][j]).collect())
        .collect();
    // Lipschitz constant of the gradient: largest eigenvalue of Q.
    let mut v = vec![1.0; n];
    let mut lip = 0.0;
    for _ in 0..500 {
        let u: Vec<f64> = (0..n).map(|i| (0..n).map(|j| q[i][j] * v[j]).sum()).collect();
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        lip = norm / v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = u.iter().map(|x| x / norm).collect();
    }
    let step = 1.0 / (lip * 1.01 + 1e-12);
    let project = |z: &[f64]| -> Vec<f64> {
        // Find lambda with sum y_i clip(z_i - lambda y_i) = 0 by bisection.
        let g = |lam: f64| -> f64 {
            (0..n)
                .map(|i| y[i] * (z[i] - lam * y[i]).clamp(0.0, c[i]))
                .sum()
        };
        let (mut lo, mut hi) = (-1e6, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lam = 0.5 * (lo + hi);
        (0..n).map(|i| (z[i] - lam * y[i]).clamp(0.0, c[i])).collect()
    };
    let objective = |a: &[f64]| -> f64 {
        let quad: f64 = (0..n)
            .map(|i| a[i] * (0..n).map(|j| q[i][j] * a[j]).sum::<f64>())
            .sum();
        a.iter().sum::<f64>() - 0.5 * quad
    };
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0f64;
    for _ in 0..iterations {
        // Gradient of the maximized objective: 1 - Qz.
        let grad: Vec<f64> = (0..n)
            .map(|i| 1.0 - (0..n).map(|j| q[i][j] * z[j]).sum::<f64>())
            .collect();
        let moved: Vec<f64> = (0..n).map(|i| z[i] + step * grad[i]).collect();
        let next = project(&moved);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = (0..n)
            .map(|i| next[i] + (t - 1.0) / t_next * (next[i] - a[i]))
            .collect();
        a = next;
        t = t_next;
    }
    let obj = objective(&a);
    (a, obj)
}

/// Maximal KKT violation `max_{I_up} -y_t g_t - min_{I_low} -y_t g_t` of a
/// dual point, with `g = Qa - 1`. Bound tests use a relative slack.
pub fn kkt_violation(k: &[Vec<f64>], y: &[f64], c: &[f64], a: &[f64]) -> f64 {
    let n = y.len();
    let slack = 1e-9;
    let mut up = f64::NEG_INFINITY;
    let mut low = f64::INFINITY;
    for t in 0..n {
        let g = y[t] * (0..n).map(|j| y[j] * k[t][j] * a[j]).sum::<f64>() - 1.0;
        let v = -y[t] * g;
        let below_c = a[t] < c[t] - slack * c[t];
        let above_0 = a[t] > slack * c[t];
        let in_up = if y[t] > 0.0 { below_c } else { above_0 };
        let in_low = if y[t] > 0.0 { above_0 } else { below_c };
        if in_up {
            up = up.max(v);
        }
        if in_low {
            low = low.min(v);
        }
    }
    (up - low).max(0.0)
}

/// Per-class F1 weighted by support, straight from the definitions.
pub fn weighted_f1(t: &[u8], p: &[u8]) -> f64 {
    let mut labels: Vec<u8> = t.iter().chain(p).copied().collect();
    labels.sort();
    labels.dedup();
    let mut acc = 0.0;
    for &l in &labels {
        let tp = t.iter().zip(p).filter(|(a, b)| **a == l && **b == l).count() as f64;
        let fp = t.iter().zip(p).filter(|(a, b)| **a != l && **b == l).count() as f64;
        let fn_ = t.iter().zip(p).filter(|(a, b)| **a == l && **b != l).count() as f64;
        let prec = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let rec = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f1 = if prec + rec > 0.0 { 2.0 * prec * rec / (prec + rec) } else { 0.0 };
        acc += f1 * (tp + fn_);
    }
    acc / t.len() as f64
}
