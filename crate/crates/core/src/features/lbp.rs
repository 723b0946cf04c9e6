use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{DescriptorKind, FeatureVector};
use crate::math;
use crate::raster::GrayImage;
use crate::{Error, Result};

/// `points` samples on a circle of `radius` pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbpRing {
    pub points: usize,
    pub radius: f64,
}

/// How circle samples off the pixel grid are read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// Nearest pixel. Comparisons then only see original gray levels, so
    /// codes are invariant to any strictly increasing gray remapping.
    #[default]
    Nearest,
    /// Bilinear interpolation between the four surrounding pixels.
    Bilinear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbpParams {
    pub rings: Vec<LbpRing>,
    #[serde(default)]
    pub sampling: Sampling,
}

impl Default for LbpParams {
    fn default() -> Self {
        LbpParams {
            rings: vec![
                LbpRing {
                    points: 8,
                    radius: 1.0,
                },
                LbpRing {
                    points: 16,
                    radius: 2.0,
                },
            ],
            sampling: Sampling::Nearest,
        }
    }
}

impl LbpParams {
    pub fn dimension(&self) -> usize {
        self.rings.iter().map(|r| r.points + 2).sum()
    }
}

/// Rotation-invariant uniform code: the number of set bits when the circular
/// pattern has at most two 0/1 transitions, `P + 1` otherwise.
pub fn riu2_code(bits: &[bool]) -> usize {
    let p = bits.len();
    let transitions = (0..p).filter(|&i| bits[i] != bits[(i + 1) % p]).count();
    if transitions <= 2 {
        bits.iter().filter(|&&b| b).count()
    } else {
        p + 1
    }
}

fn snap(v: f64) -> f64 {
    let r = math::round(v);
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

/// Multiresolution riu2 LBP: one L1-normalized `P + 2` bin histogram per
/// ring over the pixels whose whole circle lies inside the image, concatenated.
pub fn lbp(img: &GrayImage, p: &LbpParams) -> Result<FeatureVector> {
    if p.rings.is_empty() {
        return Err(Error::InvalidParameter("LBP needs at least one ring"));
    }
    for ring in &p.rings {
        if ring.points < 4 || ring.points > 64 || !(ring.radius >= 1.0) {
            return Err(Error::InvalidParameter("LBP ring needs 4..=64 points and radius >= 1"));
        }
    }
    let (w, h) = img.dimensions();
    let max_margin = p
        .rings
        .iter()
        .map(|r| math::ceil(r.radius) as usize)
        .max()
        .unwrap_or(1);
    if w <= 2 * max_margin + 1 || h <= 2 * max_margin + 1 {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min_width: 2 * max_margin + 2,
            min_height: 2 * max_margin + 2,
        });
    }

    let mut values = Vec::with_capacity(p.dimension());
    for ring in &p.rings {
        values.extend(ring_histogram(img, ring, p.sampling));
    }
    Ok(FeatureVector {
        kind: DescriptorKind::Lbp,
        values,
    })
}

fn ring_histogram(img: &GrayImage, ring: &LbpRing, sampling: Sampling) -> Vec<f64> {
    let (w, h) = img.dimensions();
    let margin = math::ceil(ring.radius) as usize;
    let offsets: Vec<(f64, f64)> = (0..ring.points)
        .map(|i| {
            let theta = 2.0 * core::f64::consts::PI * i as f64 / ring.points as f64;
            (snap(ring.radius * math::cos(theta)), snap(-ring.radius * math::sin(theta)))
        })
        .collect();
    let mut hist = vec![0.0; ring.points + 2];
    let mut bits = vec![false; ring.points];
    let mut valid = 0usize;
    for y in margin..h - margin {
        for x in margin..w - margin {
            let center = img.get(x, y) as f64;
            for (bit, &(dx, dy)) in bits.iter_mut().zip(&offsets) {
                let sample = match sampling {
                    Sampling::Nearest => {
                        let sx = (x as f64 + math::round(dx)) as usize;
                        let sy = (y as f64 + math::round(dy)) as usize;
                        img.get(sx, sy) as f64
                    }
                    Sampling::Bilinear => bilinear(img, x as f64 + dx, y as f64 + dy),
                };
                *bit = sample >= center;
            }
            hist[riu2_code(&bits)] += 1.0;
            valid += 1;
        }
    }
    let total = valid as f64;
    hist.iter_mut().for_each(|v| *v /= total);
    hist
}

fn bilinear(img: &GrayImage, x: f64, y: f64) -> f64 {
    let (x0, y0) = (math::floor(x), math::floor(y));
    let (fx, fy) = (x - x0, y - y0);
    let (x0, y0) = (x0 as usize, y0 as usize);
    let x1 = if fx > 0.0 { x0 + 1 } else { x0 };
    let y1 = if fy > 0.0 { y0 + 1 } else { y0 };
    let v = |xx: usize, yy: usize| img.get(xx, yy) as f64;
    let top = v(x0, y0) + fx * (v(x1, y0) - v(x0, y0));
    let bottom = v(x0, y1) + fx * (v(x1, y1) - v(x0, y1));
    top + fy * (bottom - top)
}
