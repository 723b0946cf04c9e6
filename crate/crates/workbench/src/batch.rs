//! `segment` over many slides: per-object PNGs, trace rasters and the
//! manifest.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use pollen_core::pipeline::{run_pipeline_traced, PipelineConfig, PipelineTrace, Stage, TraceRaster};
use pollen_core::RgbImage;

use crate::imageio::{load_rgb, save_gray, save_mask, save_rgb};
use crate::manifest::{merge_records, read_manifest, write_manifest, ManifestRecord};
use crate::{Result, WorkbenchError};

pub const MANIFEST_NAME: &str = "manifest.jsonl";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SegmentSummary {
    pub images: usize,
    pub objects: usize,
    /// Records added to the manifest; re-segmented ids keep their old record.
    pub added: usize,
    pub manifest: PathBuf,
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|source| WorkbenchError::Io {
        path: p.to_path_buf(),
        source,
    })
}

fn source_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "slide".to_string())
}

/// Hue to 0..=255, saturation and value scaled by 255.
fn hsv_as_rgb(img: &pollen_core::HsvImage) -> RgbImage {
    img.map(|p| {
        let q = |v: f32| v.round().clamp(0.0, 255.0) as u8;
        [q(p.h / 360.0 * 255.0), q(p.s * 255.0), q(p.v * 255.0)]
    })
}

pub fn write_trace(trace: &PipelineTrace, dir: &Path, source: &str) -> Result<()> {
    for stage in Stage::ALL {
        let Some(r) = trace.get(stage) else { continue };
        let path = dir.join(format!("{source}_{}.png", stage.letter()));
        match r {
            TraceRaster::Rgb(img) => save_rgb(img, &path)?,
            TraceRaster::Gray(img) => save_gray(img, &path)?,
            TraceRaster::Hsv(img) => save_rgb(&hsv_as_rgb(img), &path)?,
            TraceRaster::Mask(m) => save_mask(m, &path)?,
        }
    }
    Ok(())
}

fn segment_one(path: &Path, out: &Path, cfg: &PipelineConfig, trace: bool) -> Result<Vec<ManifestRecord>> {
    let img = load_rgb(path)?;
    let source = source_name(path);
    let (objects, t) = run_pipeline_traced(&img, cfg, &source, trace)?;
    if trace {
        write_trace(&t, &out.join("trace"), &source)?;
    }
    let mut records = Vec::with_capacity(objects.len());
    for o in objects {
        let b = o.bbox;
        let mut rec = ManifestRecord::new(
            &o.object_id,
            &path.to_string_lossy(),
            [b.min_x, b.min_y, b.max_x, b.max_y],
            [o.centroid.0, o.centroid.1],
        );
        save_rgb(&o.crop, &out.join(&rec.crop))?;
        save_mask(&o.mask, &out.join(&rec.mask))?;
        save_rgb(&o.green_crop, &out.join(&rec.green_crop))?;
        rec.extra.insert("area".into(), json!(o.area));
        rec.extra.insert("window".into(), json!([o.window.0, o.window.1]));
        rec.extra.insert("oversize".into(), json!(o.oversize));
        records.push(rec);
    }
    Ok(records)
}

/// Segments every slide in parallel and merges the objects into
/// `out/manifest.jsonl`. Slide stems must be unique, since they prefix ids.
pub fn segment_images(paths: &[PathBuf], out: &Path, cfg: &PipelineConfig, trace: bool) -> Result<SegmentSummary> {
    cfg.validate()?;
    let mut stems = std::collections::HashSet::new();
    for p in paths {
        if !stems.insert(source_name(p)) {
            return Err(WorkbenchError::Invalid(format!("duplicate slide name {}", source_name(p))));
        }
    }
    for sub in ["crops", "masks", "green"] {
        mkdir(&out.join(sub))?;
    }
    if trace {
        mkdir(&out.join("trace"))?;
    }
    let per_image = paths
        .par_iter()
        .map(|p| segment_one(p, out, cfg, trace))
        .collect::<Result<Vec<_>>>()?;
    let objects: Vec<ManifestRecord> = per_image.into_iter().flatten().collect();

    let manifest = out.join(MANIFEST_NAME);
    let mut records = if manifest.exists() {
        read_manifest(&manifest)?
    } else {
        Vec::new()
    };
    let count = objects.len();
    let added = merge_records(&mut records, objects);
    write_manifest(&manifest, &records)?;
    Ok(SegmentSummary {
        images: paths.len(),
        objects: count,
        added,
        manifest,
    })
}
