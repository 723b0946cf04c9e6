//! Texture descriptors over object crops.

mod hog;
mod lbp;

pub use hog::{hog, hog_cell_histograms, l2_hys, HogParams};
pub use lbp::{lbp, riu2_code, LbpParams, LbpRing, Sampling};

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::raster::{rgb_to_gray, RgbImage};
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptorKind {
    Hog,
    Lbp,
}

impl DescriptorKind {
    pub fn name(self) -> &'static str {
        match self {
            DescriptorKind::Hog => "hog",
            DescriptorKind::Lbp => "lbp",
        }
    }
}

impl core::str::FromStr for DescriptorKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hog" => Ok(DescriptorKind::Hog),
            "lbp" => Ok(DescriptorKind::Lbp),
            _ => Err(crate::Error::InvalidParameter("descriptor kind must be hog or lbp")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub kind: DescriptorKind,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn dimension(&self) -> usize {
        self.values.len()
    }
}

/// Descriptor choice plus the parameters of both descriptors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub kind: DescriptorKind,
    #[serde(default)]
    pub hog: HogParams,
    #[serde(default)]
    pub lbp: LbpParams,
}

impl FeatureConfig {
    pub fn new(kind: DescriptorKind) -> Self {
        FeatureConfig {
            kind,
            hog: HogParams::default(),
            lbp: LbpParams::default(),
        }
    }

    /// Descriptor of an RGB crop (typically the green-background crop),
    /// computed on its luma.
    pub fn extract(&self, crop: &RgbImage) -> Result<FeatureVector> {
        let gray = rgb_to_gray(crop);
        match self.kind {
            DescriptorKind::Hog => hog(&gray, &self.hog),
            DescriptorKind::Lbp => lbp(&gray, &self.lbp),
        }
    }
}
