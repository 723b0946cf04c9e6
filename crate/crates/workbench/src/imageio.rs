use std::path::Path;

use pollen_core::{BinaryMask, GrayImage, RgbImage};

use crate::{Result, WorkbenchError};

fn image_err(path: &Path) -> impl FnOnce(image::ImageError) -> WorkbenchError + '_ {
    move |source| WorkbenchError::Image {
        path: path.to_path_buf(),
        source,
    }
}

/// Any format `image` can decode, converted to 8-bit RGB.
pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).map_err(image_err(path))?.into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(RgbImage::from_interleaved(w, h, img.as_raw())?)
}

pub fn load_gray(path: &Path) -> Result<GrayImage> {
    let img = image::open(path).map_err(image_err(path))?.into_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(GrayImage::new(w, h, img.into_raw())?)
}

/// Nonzero pixels are foreground.
pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    Ok(BinaryMask::from_gray(&load_gray(path)?))
}

pub fn save_rgb(img: &RgbImage, path: &Path) -> Result<()> {
    image::save_buffer(
        path,
        &img.to_interleaved(),
        img.width() as u32,
        img.height() as u32,
        image::ColorType::Rgb8,
    )
    .map_err(image_err(path))
}

pub fn save_gray(img: &GrayImage, path: &Path) -> Result<()> {
    image::save_buffer(
        path,
        img.pixels(),
        img.width() as u32,
        img.height() as u32,
        image::ColorType::L8,
    )
    .map_err(image_err(path))
}

/// Foreground 255, background 0.
pub fn save_mask(mask: &BinaryMask, path: &Path) -> Result<()> {
    save_gray(&mask.to_gray(), path)
}
