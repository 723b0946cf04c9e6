//! Seeded synthetic slides with exact ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use pollen_core::{BinaryMask, RegionMask, Rgb, RgbImage};

use crate::{Result, WorkbenchError};

/// Scene recipe. Every field has a default, so a spec file only lists what
/// it changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub width: usize,
    pub height: usize,
    /// Inclusive range of planted grain counts; the count is drawn per scene.
    pub objects: (usize, usize),
    /// Grain radius range in pixels, inclusive of the light rim.
    pub radius: (f64, f64),
    /// Mean stain color of grain cores.
    pub stain: Rgb,
    /// Per-channel standard deviation of the per-grain stain color.
    pub stain_jitter: f64,
    /// Width of the light rim around each grain core.
    pub rim_width: f64,
    /// How much brighter than the background the rim is.
    pub rim_lift: u8,
    pub background: Rgb,
    /// Standard deviation of additive per-pixel Gaussian noise.
    pub noise: f64,
    /// Bright ring distractors ("bubbles").
    pub bubbles: usize,
    pub bubble_radius: (f64, f64),
    pub bubble_thickness: f64,
    /// Dark speckle distractors ("dust"), each smaller than `dust_max_area`.
    pub dust: usize,
    pub dust_radius: (f64, f64),
    pub dust_max_area: usize,
    /// Minimum clearance between any two planted shapes.
    pub gap: f64,
    /// Minimum distance from a grain to the image border.
    pub border: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            width: 1024,
            height: 1024,
            objects: (5, 15),
            radius: (14.0, 28.0),
            stain: [120, 60, 110],
            stain_jitter: 8.0,
            rim_width: 5.0,
            rim_lift: 20,
            background: [205, 195, 200],
            noise: 6.0,
            bubbles: 3,
            bubble_radius: (14.0, 30.0),
            bubble_thickness: 3.0,
            dust: 12,
            dust_radius: (1.5, 5.0),
            dust_max_area: 99,
            gap: 18.0,
            border: 12.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantedKind {
    Grain,
    Bubble,
    Dust,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Planted {
    pub kind: PlantedKind,
    /// Geometric center.
    pub center: (f64, f64),
    pub radius: f64,
    pub area: usize,
    /// Mean of the mask pixel coordinates.
    pub centroid: (f64, f64),
    pub mask: RegionMask,
}

#[derive(Clone, Debug)]
pub struct SyntheticScene {
    pub image: RgbImage,
    pub planted: Vec<Planted>,
}

impl SyntheticScene {
    pub fn grains(&self) -> impl Iterator<Item = &Planted> {
        self.planted.iter().filter(|p| p.kind == PlantedKind::Grain)
    }

    pub fn of_kind(&self, kind: PlantedKind) -> impl Iterator<Item = &Planted> {
        self.planted.iter().filter(move |p| p.kind == kind)
    }
}

/// Pixels with `(x - cx)^2 + (y - cy)^2 <= r^2`, clipped to the image.
pub fn disk_mask(cx: f64, cy: f64, r: f64, width: usize, height: usize) -> RegionMask {
    let x0 = (cx - r).floor().max(0.0) as usize;
    let y0 = (cy - r).floor().max(0.0) as usize;
    let x1 = ((cx + r).ceil() as usize).min(width - 1);
    let y1 = ((cy + r).ceil() as usize).min(height - 1);
    let mask = BinaryMask::from_fn(x1 - x0 + 1, y1 - y0 + 1, |x, y| {
        let dx = (x0 + x) as f64 - cx;
        let dy = (y0 + y) as f64 - cy;
        dx * dx + dy * dy <= r * r
    });
    RegionMask { x0, y0, mask }
}

fn planted(kind: PlantedKind, cx: f64, cy: f64, r: f64, w: usize, h: usize) -> Planted {
    let mask = disk_mask(cx, cy, r, w, h);
    let (mut n, mut sx, mut sy) = (0usize, 0.0, 0.0);
    for y in 0..mask.mask.height() {
        for x in 0..mask.mask.width() {
            if mask.mask.get(x, y) {
                n += 1;
                sx += (mask.x0 + x) as f64;
                sy += (mask.y0 + y) as f64;
            }
        }
    }
    Planted {
        kind,
        center: (cx, cy),
        radius: r,
        area: n,
        centroid: (sx / n.max(1) as f64, sy / n.max(1) as f64),
        mask,
    }
}

fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn range(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

pub fn generate_scene(spec: &SyntheticSpec) -> Result<SyntheticScene> {
    let (w, h) = (spec.width, spec.height);
    if w == 0 || h == 0 {
        return Err(WorkbenchError::Spec("image size must be positive".into()));
    }
    if spec.objects.0 > spec.objects.1 || spec.radius.0 > spec.radius.1 || spec.radius.0 <= 0.0 {
        return Err(WorkbenchError::Spec("ranges must be ordered and radii positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let count = rng.random_range(spec.objects.0..=spec.objects.1);

    // Placement: (center, radius) of everything planted so far.
    let mut placed: Vec<(f64, f64, f64)> = Vec::new();
    let place = |placed: &mut Vec<(f64, f64, f64)>, rng: &mut ChaCha8Rng, r: f64, border: f64, what: &str| -> Result<(f64, f64)> {
        let lo = r + border;
        if 2.0 * lo >= w as f64 || 2.0 * lo >= h as f64 {
            return Err(WorkbenchError::Spec(format!("{what} of radius {r} does not fit")));
        }
        for _ in 0..10_000 {
            let cx = rng.random_range(lo..w as f64 - lo).round();
            let cy = rng.random_range(lo..h as f64 - lo).round();
            let clear = placed.iter().all(|&(px, py, pr)| {
                let d = ((cx - px).powi(2) + (cy - py).powi(2)).sqrt();
                d >= r + pr + spec.gap
            });
            if clear {
                placed.push((cx, cy, r));
                return Ok((cx, cy));
            }
        }
        Err(WorkbenchError::Spec(format!("could not place {what} without overlap")))
    };

    let mut items = Vec::new();
    for _ in 0..count {
        let r = range(&mut rng, spec.radius);
        let (cx, cy) = place(&mut placed, &mut rng, r, spec.border, "grain")?;
        items.push(planted(PlantedKind::Grain, cx, cy, r, w, h));
    }
    for _ in 0..spec.bubbles {
        let r = range(&mut rng, spec.bubble_radius);
        let (cx, cy) = place(&mut placed, &mut rng, r, 1.0, "bubble")?;
        items.push(planted(PlantedKind::Bubble, cx, cy, r, w, h));
    }
    for _ in 0..spec.dust {
        let mut r = range(&mut rng, spec.dust_radius);
        let mut p;
        loop {
            let (cx, cy) = place(&mut placed, &mut rng, r, 1.0, "dust")?;
            p = planted(PlantedKind::Dust, cx, cy, r, w, h);
            if p.area <= spec.dust_max_area {
                break;
            }
            placed.pop();
            r *= 0.9;
        }
        items.push(p);
    }

    let mut image = RgbImage::filled(w, h, spec.background);
    let bg = spec.background.map(f64::from);
    for p in &items {
        let (cx, cy) = p.center;
        let color: [f64; 3] = match p.kind {
            PlantedKind::Grain => {
                let jitter = Normal::new(0.0, spec.stain_jitter.max(1e-9)).map_err(|e| WorkbenchError::Spec(e.to_string()))?;
                let shift = jitter.sample(&mut rng);
                spec.stain.map(|c| c as f64 + shift)
            }
            PlantedKind::Dust => spec.stain.map(|c| c as f64 * 0.7),
            PlantedKind::Bubble => bg,
        };
        let m = &p.mask;
        for y in 0..m.mask.height() {
            for x in 0..m.mask.width() {
                if !m.mask.get(x, y) {
                    continue;
                }
                let (gx, gy) = (m.x0 + x, m.y0 + y);
                let d = ((gx as f64 - cx).powi(2) + (gy as f64 - cy).powi(2)).sqrt();
                let px = match p.kind {
                    PlantedKind::Grain if d > p.radius - spec.rim_width => {
                        bg.map(|c| c + spec.rim_lift as f64)
                    }
                    PlantedKind::Bubble if d > p.radius - spec.bubble_thickness => {
                        bg.map(|c| c + 2.0 * spec.rim_lift as f64)
                    }
                    PlantedKind::Bubble => bg,
                    _ => color,
                };
                image.set(gx, gy, px.map(clamp_u8));
            }
        }
    }
    if spec.noise > 0.0 {
        let normal = Normal::new(0.0, spec.noise).map_err(|e| WorkbenchError::Spec(e.to_string()))?;
        for p in image.pixels_mut() {
            for c in p.iter_mut() {
                *c = clamp_u8(*c as f64 + normal.sample(&mut rng));
            }
        }
    }
    Ok(SyntheticScene { image, planted: items })
}
