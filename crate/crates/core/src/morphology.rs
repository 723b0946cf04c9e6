//! Binary mask morphology: connected components, area filtering, flood fill,
//! hole filling, square-kernel dilation/erosion/closing and Moore contour
//! tracing.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::raster::{BinaryMask, LabelMap, Raster, Rgb, RgbImage};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(i64, i64)] {
        match self {
            Connectivity::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
            Connectivity::Eight => &[
                (-1, -1),
                (0, -1),
                (1, -1),
                (-1, 0),
                (1, 0),
                (-1, 1),
                (0, 1),
                (1, 1),
            ],
        }
    }

    /// Neighbors already visited by a raster scan.
    fn prior_offsets(self) -> &'static [(i64, i64)] {
        match self {
            Connectivity::Four => &[(-1, 0), (0, -1)],
            Connectivity::Eight => &[(-1, 0), (-1, -1), (0, -1), (1, -1)],
        }
    }
}

/// Inclusive pixel bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_x: usize,
    pub min_y: usize,
    pub max_x: usize,
    pub max_y: usize,
}

impl BoundingBox {
    pub fn width(&self) -> usize {
        self.max_x - self.min_x + 1
    }

    pub fn height(&self) -> usize {
        self.max_y - self.min_y + 1
    }

    /// Grows the box by `margin` on every side, clipped to `width x height`.
    pub fn expand(&self, margin: usize, width: usize, height: usize) -> BoundingBox {
        BoundingBox {
            min_x: self.min_x.saturating_sub(margin),
            min_y: self.min_y.saturating_sub(margin),
            max_x: (self.max_x + margin).min(width - 1),
            max_y: (self.max_y + margin).min(height - 1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentStats {
    pub label: u32,
    pub area: usize,
    pub bbox: BoundingBox,
    /// Mean `(x, y)` of all component pixels.
    pub centroid: (f64, f64),
}

/// Labels foreground components. Labels run `1..=K` in the raster order of
/// each component's first pixel; background stays 0.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> (LabelMap, Vec<ComponentStats>) {
    let (w, h) = mask.dimensions();
    let mut provisional = vec![0u32; w * h];
    // parent[0] is unused so provisional labels start at 1.
    let mut parent: Vec<u32> = vec![0];

    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let mut label = 0u32;
            for &(dx, dy) in connectivity.prior_offsets() {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if !mask.in_bounds(nx, ny) {
                    continue;
                }
                let other = provisional[ny as usize * w + nx as usize];
                if other == 0 {
                    continue;
                }
                if label == 0 {
                    label = find(&mut parent, other);
                } else {
                    label = union(&mut parent, label, other);
                }
            }
            if label == 0 {
                label = parent.len() as u32;
                parent.push(label);
            }
            provisional[y * w + x] = label;
        }
    }

    let mut final_of_root = vec![0u32; parent.len()];
    let mut stats: Vec<ComponentStats> = Vec::new();
    let mut sums: Vec<(u64, u64)> = Vec::new();
    let mut labels = vec![0u32; w * h];
    for y in 0..h {
        for x in 0..w {
            let p = provisional[y * w + x];
            if p == 0 {
                continue;
            }
            let root = find(&mut parent, p) as usize;
            if final_of_root[root] == 0 {
                stats.push(ComponentStats {
                    label: stats.len() as u32 + 1,
                    area: 0,
                    bbox: BoundingBox {
                        min_x: x,
                        min_y: y,
                        max_x: x,
                        max_y: y,
                    },
                    centroid: (0.0, 0.0),
                });
                sums.push((0, 0));
                final_of_root[root] = stats.len() as u32;
            }
            let label = final_of_root[root];
            labels[y * w + x] = label;
            let s = &mut stats[label as usize - 1];
            s.area += 1;
            s.bbox.min_x = s.bbox.min_x.min(x);
            s.bbox.max_x = s.bbox.max_x.max(x);
            s.bbox.max_y = y;
            let acc = &mut sums[label as usize - 1];
            acc.0 += x as u64;
            acc.1 += y as u64;
        }
    }
    for (s, (sx, sy)) in stats.iter_mut().zip(sums) {
        s.centroid = (sx as f64 / s.area as f64, sy as f64 / s.area as f64);
    }
    (Raster::new(w, h, labels).expect("shape preserved"), stats)
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let grand = parent[parent[x as usize] as usize];
        parent[x as usize] = grand;
        x = grand;
    }
    x
}

fn union(parent: &mut [u32], a: u32, b: u32) -> u32 {
    let ra = find(parent, a);
    let rb = find(parent, b);
    let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
    parent[hi as usize] = lo;
    lo
}

/// Keeps components with `area >= min_area`, clearing the rest.
pub fn filter_components_by_area(mask: &BinaryMask, min_area: usize, connectivity: Connectivity) -> Result<BinaryMask> {
    if min_area == 0 {
        return Err(Error::InvalidParameter("min_area must be >= 1"));
    }
    let (labels, stats) = connected_components(mask, connectivity);
    let keep: Vec<bool> = core::iter::once(false)
        .chain(stats.iter().map(|s| s.area >= min_area))
        .collect();
    Ok(labels.map(|&l| keep[l as usize]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MorphOp {
    Dilate,
    Erode,
    /// Dilation followed by erosion, once per iteration.
    Close,
}

/// Morphology with an all-ones `kernel_size x kernel_size` square.
/// Pixels outside the image count as background.
pub fn morph(mask: &BinaryMask, op: MorphOp, kernel_size: usize, iterations: usize) -> Result<BinaryMask> {
    if kernel_size < 3 || kernel_size % 2 == 0 {
        return Err(Error::InvalidParameter("morphology kernel must be odd and >= 3"));
    }
    if iterations == 0 {
        return Err(Error::InvalidParameter("morphology iterations must be >= 1"));
    }
    let r = kernel_size / 2;
    let mut out = mask.clone();
    for _ in 0..iterations {
        out = match op {
            MorphOp::Dilate => dilate_once(&out, r),
            MorphOp::Erode => erode_once(&out, r),
            MorphOp::Close => erode_once(&dilate_once(&out, r), r),
        };
    }
    Ok(out)
}

pub fn dilate(mask: &BinaryMask, kernel_size: usize, iterations: usize) -> Result<BinaryMask> {
    morph(mask, MorphOp::Dilate, kernel_size, iterations)
}

pub fn erode(mask: &BinaryMask, kernel_size: usize, iterations: usize) -> Result<BinaryMask> {
    morph(mask, MorphOp::Erode, kernel_size, iterations)
}

pub fn close(mask: &BinaryMask, kernel_size: usize, iterations: usize) -> Result<BinaryMask> {
    morph(mask, MorphOp::Close, kernel_size, iterations)
}

fn dilate_once(mask: &BinaryMask, r: usize) -> BinaryMask {
    // Square kernels are separable: a horizontal then a vertical pass.
    let rows = window_pass(mask, r, true, |count, _| count > 0);
    window_pass(&rows, r, false, |count, _| count > 0)
}

fn erode_once(mask: &BinaryMask, r: usize) -> BinaryMask {
    let full = 2 * r + 1;
    let rows = window_pass(mask, r, true, |count, _| count == full);
    window_pass(&rows, r, false, |count, _| count == full)
}

/// Counts foreground in a sliding 1-D window of radius `r` (out-of-image
/// samples count as background) and maps each count through `decide`.
fn window_pass(mask: &BinaryMask, r: usize, horizontal: bool, decide: impl Fn(usize, usize) -> bool) -> BinaryMask {
    let (w, h) = mask.dimensions();
    let (len, lines) = if horizontal { (w, h) } else { (h, w) };
    let at = |line: usize, i: usize| {
        if horizontal {
            mask.get(i, line)
        } else {
            mask.get(line, i)
        }
    };
    let mut out = BinaryMask::filled(w, h, false);
    for line in 0..lines {
        let mut count = (0..=r.min(len - 1)).filter(|&i| at(line, i)).count();
        for i in 0..len {
            let v = decide(count, i);
            if horizontal {
                out.set(i, line, v);
            } else {
                out.set(line, i, v);
            }
            if i + r + 1 < len && at(line, i + r + 1) {
                count += 1;
            }
            if i >= r && at(line, i - r) {
                count -= 1;
            }
        }
    }
    out
}

/// Pixels reachable from `seeds` through pixels whose value equals `value`.
fn reachable(mask: &BinaryMask, seeds: impl IntoIterator<Item = (usize, usize)>, value: bool, connectivity: Connectivity) -> BinaryMask {
    let (w, h) = mask.dimensions();
    let mut seen = BinaryMask::filled(w, h, false);
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for (x, y) in seeds {
        if mask.get(x, y) == value && !seen.get(x, y) {
            seen.set(x, y, true);
            stack.push((x, y));
        }
    }
    while let Some((x, y)) = stack.pop() {
        for &(dx, dy) in connectivity.offsets() {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if !mask.in_bounds(nx, ny) {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            if mask.get(nx, ny) == value && !seen.get(nx, ny) {
                seen.set(nx, ny, true);
                stack.push((nx, ny));
            }
        }
    }
    seen
}

/// Toggles the connected region (of the seed's own value) containing `seed`.
pub fn flood_fill(mask: &BinaryMask, seed: (usize, usize), connectivity: Connectivity) -> Result<BinaryMask> {
    let (x, y) = seed;
    if x >= mask.width() || y >= mask.height() {
        return Err(Error::OutOfBounds { x, y });
    }
    let value = mask.get(x, y);
    let region = reachable(mask, [seed], value, connectivity);
    let mut out = mask.clone();
    for (p, &r) in out.pixels_mut().iter_mut().zip(region.pixels()) {
        if r {
            *p = !value;
        }
    }
    Ok(out)
}

/// Background regions not 4-connected to the image border become foreground.
pub fn fill_holes(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = mask.dimensions();
    let border = (0..w)
        .flat_map(|x| [(x, 0), (x, h - 1)])
        .chain((0..h).flat_map(|y| [(0, y), (w - 1, y)]));
    let outside = reachable(mask, border, false, Connectivity::Four);
    outside.complement()
}

/// Closed outer boundary of a component, as traced pixel coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contour {
    points: Vec<(usize, usize)>,
}

impl Contour {
    pub fn points(&self) -> &[(usize, usize)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

// Clockwise in image coordinates (y grows downward), starting west.
const MOORE: [(i64, i64); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

fn direction_of(dx: i64, dy: i64) -> usize {
    MOORE
        .iter()
        .position(|&d| d == (dx, dy))
        .expect("backtrack pixel is an 8-neighbor")
}

/// Outer contours of every 8-connected component, ordered by label, with the
/// component statistics alongside.
pub fn extract_contours(mask: &BinaryMask) -> Vec<(Contour, ComponentStats)> {
    let (labels, stats) = connected_components(mask, Connectivity::Eight);
    let mut starts = vec![None; stats.len()];
    for (i, &l) in labels.pixels().iter().enumerate() {
        if l != 0 && starts[l as usize - 1].is_none() {
            starts[l as usize - 1] = Some((i % mask.width(), i / mask.width()));
        }
    }
    starts
        .into_iter()
        .zip(stats)
        .map(|(start, s)| (trace_boundary(mask, start.expect("every label has a pixel")), s))
        .collect()
}

/// Moore-neighbor tracing from the component's first raster pixel, stopping
/// when the initial move is about to repeat.
fn trace_boundary(mask: &BinaryMask, start: (usize, usize)) -> Contour {
    let fg = |x: i64, y: i64| mask.in_bounds(x, y) && mask.get(x as usize, y as usize);
    let s = (start.0 as i64, start.1 as i64);
    let mut points = vec![start];
    let mut p = s;
    // The west neighbor of a raster-first pixel is background or off-image.
    let mut back = (s.0 - 1, s.1);
    let mut first_move: Option<(i64, i64)> = None;

    loop {
        let from = direction_of(back.0 - p.0, back.1 - p.1);
        let mut next = None;
        for step in 1..=8 {
            let dir = (from + step) % 8;
            let c = (p.0 + MOORE[dir].0, p.1 + MOORE[dir].1);
            if fg(c.0, c.1) {
                let prev = (from + step - 1) % 8;
                back = (p.0 + MOORE[prev].0, p.1 + MOORE[prev].1);
                next = Some(c);
                break;
            }
        }
        let Some(n) = next else {
            // Isolated pixel.
            break;
        };
        match first_move {
            None => first_move = Some(n),
            Some(m) if p == s && n == m => break,
            Some(_) => {}
        }
        p = n;
        points.push((n.0 as usize, n.1 as usize));
    }
    if points.len() > 1 && points.last() == points.first() {
        points.pop();
    }
    Contour { points }
}

/// Overwrites contour pixels with `color`; everything else is untouched.
pub fn draw_contours(img: &RgbImage, contours: &[Contour], color: Rgb) -> Result<RgbImage> {
    let mut out = img.clone();
    for c in contours {
        for &(x, y) in c.points() {
            if x >= img.width() || y >= img.height() {
                return Err(Error::OutOfBounds { x, y });
            }
            out.set(x, y, color);
        }
    }
    Ok(out)
}
