//! File formats, synthetic slides, batch commands and the labeling service
//! around `pollen-core`.

pub mod batch;
pub mod dataset;
pub mod gridfile;
pub mod imageio;
pub mod manifest;
pub mod modelfile;
pub mod report;
pub mod server;
pub mod synthetic;

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum WorkbenchError {
    #[error(transparent)]
    Core(#[from] pollen_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("synthetic spec: {0}")]
    Spec(String),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = WorkbenchError> = std::result::Result<T, E>;
