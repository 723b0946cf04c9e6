use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{DescriptorKind, FeatureVector};
use crate::math;
use crate::raster::GrayImage;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HogParams {
    /// Unsigned orientation bins over [0, 180) degrees.
    pub bins: usize,
    /// Cell side in pixels.
    pub cell: usize,
    /// Block side in cells.
    pub block: usize,
    /// Block stride in cells.
    pub block_stride: usize,
    /// L2-Hys clipping level.
    pub clip: f64,
}

impl Default for HogParams {
    fn default() -> Self {
        HogParams {
            bins: 9,
            cell: 8,
            block: 2,
            block_stride: 1,
            clip: 0.2,
        }
    }
}

impl HogParams {
    fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::InvalidParameter("HOG needs at least 2 bins"));
        }
        if self.cell == 0 || self.block == 0 || self.block_stride == 0 {
            return Err(Error::InvalidParameter("HOG cell, block and stride must be positive"));
        }
        if !(self.clip > 0.0) {
            return Err(Error::InvalidParameter("HOG clip must be positive"));
        }
        Ok(())
    }

    /// Descriptor length for a `width x height` image.
    pub fn dimension(&self, width: usize, height: usize) -> usize {
        let (cx, cy) = (width / self.cell, height / self.cell);
        if cx < self.block || cy < self.block {
            return 0;
        }
        let bx = (cx - self.block) / self.block_stride + 1;
        let by = (cy - self.block) / self.block_stride + 1;
        bx * by * self.block * self.block * self.bins
    }
}

/// Per-cell orientation histograms in raster cell order, before block
/// normalization. Cells cover the top-left `cell * floor(size / cell)` pixels.
pub fn hog_cell_histograms(img: &GrayImage, p: &HogParams) -> Result<Vec<Vec<f64>>> {
    p.validate()?;
    let (w, h) = img.dimensions();
    let (cells_x, cells_y) = (w / p.cell, h / p.cell);
    let min_cells = p.block.max(2);
    if cells_x < min_cells || cells_y < min_cells {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min_width: min_cells * p.cell,
            min_height: min_cells * p.cell,
        });
    }
    let bin_width = 180.0 / p.bins as f64;
    let mut cells = vec![vec![0.0; p.bins]; cells_x * cells_y];
    for y in 0..cells_y * p.cell {
        for x in 0..cells_x * p.cell {
            let (xi, yi) = (x as i64, y as i64);
            let gx = img.get_clamped(xi + 1, yi) as f64 - img.get_clamped(xi - 1, yi) as f64;
            let gy = img.get_clamped(xi, yi + 1) as f64 - img.get_clamped(xi, yi - 1) as f64;
            if gx == 0.0 && gy == 0.0 {
                continue;
            }
            let magnitude = math::sqrt(gx * gx + gy * gy);
            let mut angle = math::atan2(gy, gx).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            if angle >= 180.0 {
                angle -= 180.0;
            }
            let position = angle / bin_width;
            let lower = math::floor(position);
            let frac = position - lower;
            let lo = lower as usize % p.bins;
            let hi = (lo + 1) % p.bins;
            let hist = &mut cells[(y / p.cell) * cells_x + x / p.cell];
            hist[lo] += magnitude * (1.0 - frac);
            hist[hi] += magnitude * frac;
        }
    }
    Ok(cells)
}

/// L2 normalize, clip at `clip`, renormalize. Zero blocks stay zero.
pub fn l2_hys(block: &mut [f64], clip: f64) {
    fn normalize(v: &mut [f64]) {
        let norm = math::sqrt(v.iter().map(|x| x * x).sum());
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
    }
    normalize(block);
    block.iter_mut().for_each(|x| *x = x.min(clip));
    normalize(block);
}

/// Histogram of oriented gradients with L2-Hys block normalization.
pub fn hog(img: &GrayImage, p: &HogParams) -> Result<FeatureVector> {
    let cells = hog_cell_histograms(img, p)?;
    let cells_x = img.width() / p.cell;
    let cells_y = img.height() / p.cell;
    let mut values = Vec::with_capacity(p.dimension(img.width(), img.height()));
    let mut block = Vec::with_capacity(p.block * p.block * p.bins);
    let mut by = 0;
    while by + p.block <= cells_y {
        let mut bx = 0;
        while bx + p.block <= cells_x {
            block.clear();
            for cy in by..by + p.block {
                for cx in bx..bx + p.block {
                    block.extend_from_slice(&cells[cy * cells_x + cx]);
                }
            }
            l2_hys(&mut block, p.clip);
            values.extend_from_slice(&block);
            bx += p.block_stride;
        }
        by += p.block_stride;
    }
    Ok(FeatureVector {
        kind: DescriptorKind::Hog,
        values,
    })
}
