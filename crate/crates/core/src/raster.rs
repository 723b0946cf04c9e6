//! Row-major image containers and color conversions.
//!
//! Every image kind is a [`Raster`] over a different pixel type, so crops,
//! transposes and per-pixel maps are shared by RGB, gray, HSV and mask
//! rasters alike.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Result};

/// 8-bit R, G, B sample triple.
pub type Rgb = [u8; 3];

/// Hexcone HSV: hue in degrees `[0, 360)`, saturation and value in `[0, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Hsv {
    pub h: f32,
    pub s: f32,
    pub v: f32,
}

/// A width x height grid of pixels stored row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Raster<P> {
    width: usize,
    height: usize,
    pixels: Vec<P>,
}

pub type RgbImage = Raster<Rgb>;
pub type GrayImage = Raster<u8>;
pub type HsvImage = Raster<Hsv>;
/// `true` marks foreground.
pub type BinaryMask = Raster<bool>;
/// Component labels; 0 is background.
pub type LabelMap = Raster<u32>;

impl<P> Raster<P> {
    pub fn new(width: usize, height: usize, pixels: Vec<P>) -> Result<Self> {
        if width == 0 || height == 0 || width.checked_mul(height) != Some(pixels.len()) {
            return Err(Error::InvalidDimensions {
                width,
                height,
                len: pixels.len(),
            });
        }
        Ok(Raster {
            width,
            height,
            pixels,
        })
    }

    /// Builds a raster by evaluating `f(x, y)` for every pixel.
    ///
    /// Panics if either dimension is zero.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> P) -> Self {
        assert!(width > 0 && height > 0, "raster dimensions must be positive");
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Raster {
            width,
            height,
            pixels,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    /// Always false for a constructed raster; present for API symmetry with `len`.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    #[inline]
    pub fn pixels(&self) -> &[P] {
        &self.pixels
    }

    #[inline]
    pub fn pixels_mut(&mut self) -> &mut [P] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<P> {
        self.pixels
    }

    #[inline]
    pub fn index_of(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    pub fn row(&self, y: usize) -> &[P] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    pub fn same_shape<Q>(&self, other: &Raster<Q>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn map<Q>(&self, f: impl FnMut(&P) -> Q) -> Raster<Q> {
        Raster {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(f).collect(),
        }
    }
}

impl<P: Copy> Raster<P> {
    pub fn filled(width: usize, height: usize, value: P) -> Self {
        assert!(width > 0 && height > 0, "raster dimensions must be positive");
        Raster {
            width,
            height,
            pixels: alloc::vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> P {
        self.pixels[y * self.width + x]
    }

    /// Pixel at `(x, y)` with coordinates clamped into the image (edge replication).
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64) -> P {
        let x = x.clamp(0, self.width as i64 - 1) as usize;
        let y = y.clamp(0, self.height as i64 - 1) as usize;
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: P) {
        let i = y * self.width + x;
        self.pixels[i] = value;
    }

    /// Copies the `width x height` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 || x0 + width > self.width || y0 + height > self.height {
            return Err(Error::OutOfBounds {
                x: x0 + width,
                y: y0 + height,
            });
        }
        let mut pixels = Vec::with_capacity(width * height);
        for y in y0..y0 + height {
            pixels.extend_from_slice(&self.row(y)[x0..x0 + width]);
        }
        Ok(Raster {
            width,
            height,
            pixels,
        })
    }

    pub fn transpose(&self) -> Self {
        Raster::from_fn(self.height, self.width, |x, y| self.get(y, x))
    }

    /// Rotates a quarter turn counter-clockwise.
    pub fn rotate90(&self) -> Self {
        let w = self.width;
        Raster::from_fn(self.height, self.width, |x, y| self.get(w - 1 - y, x))
    }
}

impl RgbImage {
    /// Builds an RGB image from interleaved `R,G,B` bytes.
    pub fn from_interleaved(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() % 3 != 0 {
            return Err(Error::InvalidDimensions {
                width,
                height,
                len: bytes.len(),
            });
        }
        let pixels = bytes.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Raster::new(width, height, pixels)
    }

    pub fn to_interleaved(&self) -> Vec<u8> {
        self.pixels.iter().flat_map(|p| p.iter().copied()).collect()
    }
}

impl BinaryMask {
    /// Number of foreground pixels.
    pub fn count(&self) -> usize {
        self.pixels.iter().filter(|&&b| b).count()
    }

    pub fn complement(&self) -> Self {
        self.map(|&b| !b)
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a && b)
    }

    /// `true` when every foreground pixel of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.same_shape(other)
            && self
                .pixels
                .iter()
                .zip(&other.pixels)
                .all(|(&a, &b)| !a || b)
    }

    /// Intersection over union; two empty masks count as identical.
    pub fn iou(&self, other: &Self) -> Result<f64> {
        if !self.same_shape(other) {
            return Err(Error::DimensionMismatch);
        }
        let (mut inter, mut uni) = (0usize, 0usize);
        for (&a, &b) in self.pixels.iter().zip(&other.pixels) {
            inter += (a && b) as usize;
            uni += (a || b) as usize;
        }
        Ok(if uni == 0 { 1.0 } else { inter as f64 / uni as f64 })
    }

    /// Serialized form: 0 = background, 255 = foreground.
    pub fn to_gray(&self) -> GrayImage {
        self.map(|&b| if b { 255 } else { 0 })
    }

    /// Any nonzero sample is foreground.
    pub fn from_gray(gray: &GrayImage) -> Self {
        gray.map(|&v| v != 0)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(bool, bool) -> bool) -> Result<Self> {
        if !self.same_shape(other) {
            return Err(Error::DimensionMismatch);
        }
        let pixels = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Raster {
            width: self.width,
            height: self.height,
            pixels,
        })
    }
}

/// A mask stored as a tight window inside a larger image.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionMask {
    /// Column of the window's left edge in image coordinates.
    pub x0: usize,
    /// Row of the window's top edge in image coordinates.
    pub y0: usize,
    pub mask: BinaryMask,
}

impl RegionMask {
    pub fn area(&self) -> usize {
        self.mask.count()
    }

    /// Foreground test in image coordinates.
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0
            && y >= self.y0
            && x < self.x0 + self.mask.width()
            && y < self.y0 + self.mask.height()
            && self.mask.get(x - self.x0, y - self.y0)
    }

    /// Paints the region into a full-size mask.
    pub fn to_full(&self, width: usize, height: usize) -> BinaryMask {
        let mut full = BinaryMask::filled(width, height, false);
        self.paint(&mut full);
        full
    }

    /// Sets this region's foreground pixels in `target`, clipping at its edges.
    pub fn paint(&self, target: &mut BinaryMask) {
        for y in 0..self.mask.height() {
            for x in 0..self.mask.width() {
                let (tx, ty) = (self.x0 + x, self.y0 + y);
                if self.mask.get(x, y) && tx < target.width() && ty < target.height() {
                    target.set(tx, ty, true);
                }
            }
        }
    }

    /// Extracts the window `(x0, y0, width, height)` of this region as a mask,
    /// with pixels outside the region as background.
    pub fn window(&self, x0: usize, y0: usize, width: usize, height: usize) -> BinaryMask {
        BinaryMask::from_fn(width, height, |x, y| self.contains(x0 + x, y0 + y))
    }

    pub fn iou(&self, other: &RegionMask) -> f64 {
        let x0 = self.x0.min(other.x0);
        let y0 = self.y0.min(other.y0);
        let x1 = (self.x0 + self.mask.width()).max(other.x0 + other.mask.width());
        let y1 = (self.y0 + self.mask.height()).max(other.y0 + other.mask.height());
        let a = self.window(x0, y0, x1 - x0, y1 - y0);
        let b = other.window(x0, y0, x1 - x0, y1 - y0);
        a.iou(&b).unwrap_or(0.0)
    }
}

/// BT.601 luma, `round(0.299 R + 0.587 G + 0.114 B)` with halves rounded up.
#[inline]
pub fn luma(p: Rgb) -> u8 {
    let weighted = 299 * p[0] as u32 + 587 * p[1] as u32 + 114 * p[2] as u32;
    ((weighted + 500) / 1000).min(255) as u8
}

pub fn rgb_to_gray(img: &RgbImage) -> GrayImage {
    img.map(|&p| luma(p))
}

/// Hexcone conversion of one pixel; achromatic pixels get hue 0.
pub fn rgb_pixel_to_hsv(p: Rgb) -> Hsv {
    let (r, g, b) = (p[0] as i32, p[1] as i32, p[2] as i32);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = (max - min) as f64;
    let v = max as f64 / 255.0;
    if max == min {
        return Hsv {
            h: 0.0,
            s: 0.0,
            v: v as f32,
        };
    }
    let s = delta / max as f64;
    let sector = if max == r {
        (g - b) as f64 / delta
    } else if max == g {
        (b - r) as f64 / delta + 2.0
    } else {
        (r - g) as f64 / delta + 4.0
    };
    let mut h = 60.0 * sector;
    if h < 0.0 {
        h += 360.0;
    }
    let mut h = h as f32;
    if h >= 360.0 {
        h = 0.0;
    }
    Hsv {
        h,
        s: s as f32,
        v: v as f32,
    }
}

/// Inverse of [`rgb_pixel_to_hsv`], rounding each channel to 8 bits.
pub fn hsv_pixel_to_rgb(p: Hsv) -> Rgb {
    let (h, s, v) = (p.h as f64, p.s as f64, p.v as f64);
    let c = v * s;
    let hp = (h / 60.0) % 6.0;
    let x = c * (1.0 - ((hp % 2.0) - 1.0).abs());
    let (r1, g1, b1) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let q = |u: f64| math::round((u + m) * 255.0).clamp(0.0, 255.0) as u8;
    [q(r1), q(g1), q(b1)]
}

pub fn rgb_to_hsv(img: &RgbImage) -> HsvImage {
    img.map(|&p| rgb_pixel_to_hsv(p))
}

pub fn hsv_to_rgb(img: &HsvImage) -> RgbImage {
    img.map(|&p| hsv_pixel_to_rgb(p))
}

/// HSV value channel quantized back to 8 bits.
pub fn hsv_value_channel(img: &HsvImage) -> GrayImage {
    img.map(|p| math::round(p.v as f64 * 255.0).clamp(0.0, 255.0) as u8)
}
