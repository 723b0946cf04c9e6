use std::path::Path;

use serde::{Deserialize, Serialize};

use pollen_core::features::FeatureConfig;
use pollen_core::learn::{Model, ModelParams};

use crate::{Result, WorkbenchError};

pub const FORMAT: &str = "pollen-model";
pub const VERSION: u32 = 1;

/// A trained classifier with the descriptor settings it expects.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub features: FeatureConfig,
    pub params: ModelParams,
    pub model: Model,
    /// Seed of the split the model was trained on, if any.
    #[serde(default)]
    pub split_seed: Option<u64>,
    #[serde(default)]
    pub test_fraction: Option<f64>,
}

impl ModelFile {
    pub fn new(features: FeatureConfig, params: ModelParams, model: Model) -> Self {
        ModelFile {
            format: FORMAT.to_string(),
            version: VERSION,
            features,
            params,
            model,
            split_seed: None,
            test_fraction: None,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| WorkbenchError::Invalid(e.to_string()))?;
        std::fs::write(path, text).map_err(|source| WorkbenchError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| WorkbenchError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let parse_err = |message: String| WorkbenchError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message,
        };
        let f: ModelFile = serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?;
        if f.format != FORMAT || f.version != VERSION {
            return Err(parse_err(format!("unsupported model file {} v{}", f.format, f.version)));
        }
        Ok(f)
    }
}
