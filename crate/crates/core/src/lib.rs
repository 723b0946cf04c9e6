//! Pollen micrograph workbench core.
//!
//! Two-stage object segmentation for noisy bright-field slides (mean shift
//! smoothing, Otsu and adaptive thresholds, binary morphology), per-object
//! crop extraction, HOG/LBP texture descriptors and the classical classifier
//! suite (SMO-trained SVM, MLP, random forest, AdaBoost) with the stratified
//! evaluation protocol.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and the
//! labeling service live in `pollen-workbench`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

mod error;
mod math;

pub mod features;
pub mod filters;
pub mod learn;
pub mod morphology;
pub mod pipeline;
pub mod raster;

pub use error::{Error, Result};
pub use raster::{BinaryMask, GrayImage, Hsv, HsvImage, Raster, RegionMask, Rgb, RgbImage};
