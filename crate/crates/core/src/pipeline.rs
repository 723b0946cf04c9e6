//! Two-stage slide segmentation and per-object extraction.
//!
//! Stage letters follow the audit trail the workbench can dump to disk:
//!
//! | stage | raster                                                        |
//! |-------|---------------------------------------------------------------|
//! | a     | input slide                                                   |
//! | b     | mean shift output                                             |
//! | c     | preprocessed composite (sharp foreground over blurred slide)  |
//! | d     | HSV conversion of the composite                               |
//! | e     | coarse mask after threshold, close/dilate, holes, area filter |
//! | f     | composite with coarse contours drawn                          |
//! | g     | union of refined object masks                                 |
//! | h     | input objects over the background color                      |

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::filters::{
    adaptive_threshold_gaussian, gaussian_blur, mean_shift_filter, otsu_threshold, threshold_with_polarity,
    AdaptiveParams, GaussianKernel, MeanShiftParams, Polarity,
};
use crate::math;
use crate::morphology::{
    connected_components, dilate, draw_contours, extract_contours, fill_holes, filter_components_by_area, morph,
    BoundingBox, ComponentStats, Connectivity, Contour, MorphOp,
};
use crate::raster::{
    hsv_value_channel, rgb_to_gray, rgb_to_hsv, BinaryMask, GrayImage, HsvImage, RegionMask, Rgb, RgbImage,
};
use crate::{Error, Result};

/// Which gray plane feeds the coarse segmentation threshold.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraySource {
    Luma,
    #[default]
    HsvValue,
}

/// Every numeric knob of the segmentation pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub mean_shift: MeanShiftParams,
    /// Global threshold used when Otsu sees a single gray level.
    pub otsu_fallback: u8,
    /// Minimum component area kept by preprocessing.
    pub min_area_pre: usize,
    /// Side of the Gaussian blur kernel used for the background.
    pub blur_kernel: usize,
    pub contour_color: Rgb,
    /// Side of the square structuring element.
    pub morph_kernel: usize,
    /// Minimum area of a coarse segmentation component.
    pub min_area_seg: usize,
    pub adaptive: AdaptiveParams,
    /// Minimum area of a refined component before final dilation.
    pub min_area_refine: usize,
    pub dilate_iterations: usize,
    /// Side of the square object crop.
    pub crop_size: usize,
    pub background_color: Rgb,
    pub gray_source: GraySource,
    /// Polarity of both global thresholds.
    pub threshold_polarity: Polarity,
    /// Pixels added around each coarse bounding box for refinement.
    pub refine_margin: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mean_shift: MeanShiftParams::default(),
            otsu_fallback: 127,
            min_area_pre: 500,
            blur_kernel: 11,
            contour_color: [255, 255, 0],
            morph_kernel: 3,
            min_area_seg: 100,
            adaptive: AdaptiveParams::default(),
            min_area_refine: 150,
            dilate_iterations: 5,
            crop_size: 84,
            background_color: [0, 255, 0],
            gray_source: GraySource::HsvValue,
            threshold_polarity: Polarity::ObjectsDarker,
            refine_margin: 10,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.mean_shift.validate()?;
        self.adaptive.validate()?;
        if self.min_area_pre == 0 || self.min_area_seg == 0 || self.min_area_refine == 0 {
            return Err(Error::InvalidParameter("area thresholds must be >= 1"));
        }
        for k in [self.blur_kernel, self.morph_kernel] {
            if k < 3 || k % 2 == 0 {
                return Err(Error::InvalidParameter("kernel sizes must be odd and >= 3"));
            }
        }
        if self.dilate_iterations == 0 {
            return Err(Error::InvalidParameter("dilate_iterations must be >= 1"));
        }
        if self.crop_size == 0 {
            return Err(Error::InvalidParameter("crop_size must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    Input,
    MeanShift,
    Preprocessed,
    Hsv,
    CoarseMask,
    CoarseContours,
    RefinedMask,
    GreenComposite,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Input,
        Stage::MeanShift,
        Stage::Preprocessed,
        Stage::Hsv,
        Stage::CoarseMask,
        Stage::CoarseContours,
        Stage::RefinedMask,
        Stage::GreenComposite,
    ];

    pub fn letter(self) -> char {
        (b'a' + self as u8) as char
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TraceRaster {
    Rgb(RgbImage),
    Gray(GrayImage),
    Hsv(HsvImage),
    Mask(BinaryMask),
}

/// Intermediate rasters, recorded only when tracing is on.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PipelineTrace {
    enabled: bool,
    stages: BTreeMap<Stage, TraceRaster>,
}

impl PipelineTrace {
    pub fn new(enabled: bool) -> Self {
        PipelineTrace {
            enabled,
            stages: BTreeMap::new(),
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn get(&self, stage: Stage) -> Option<&TraceRaster> {
        self.stages.get(&stage)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Stage, &TraceRaster)> {
        self.stages.iter()
    }

    pub fn merge(&mut self, other: PipelineTrace) {
        self.stages.extend(other.stages);
    }

    fn record(&mut self, stage: Stage, raster: impl FnOnce() -> TraceRaster) {
        if self.enabled {
            self.stages.insert(stage, raster());
        }
    }
}

/// One refined detection, mask in image coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectCandidate {
    pub region: RegionMask,
    pub stats: ComponentStats,
}

/// A detected object cut out of its slide.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentedObject {
    pub object_id: String,
    pub source: String,
    pub bbox: BoundingBox,
    pub centroid: (f64, f64),
    pub area: usize,
    /// Top-left corner of the crop window in slide coordinates.
    pub window: (usize, usize),
    /// Bounding box exceeds the crop window; the mask was clipped.
    pub oversize: bool,
    pub crop: RgbImage,
    pub mask: BinaryMask,
    pub green_crop: RgbImage,
}

fn threshold_plane(gray: &GrayImage, cfg: &PipelineConfig) -> BinaryMask {
    let level = otsu_threshold(gray).unwrap_or(cfg.otsu_fallback);
    threshold_with_polarity(gray, level, cfg.threshold_polarity)
}

/// First stage: flatten texture, keep large objects sharp and blur the rest.
pub fn preprocess(img: &RgbImage, cfg: &PipelineConfig, tracing: bool) -> Result<(RgbImage, PipelineTrace)> {
    cfg.validate()?;
    if img.width() < cfg.crop_size || img.height() < cfg.crop_size {
        return Err(Error::ImageTooSmall {
            width: img.width(),
            height: img.height(),
            min_width: cfg.crop_size,
            min_height: cfg.crop_size,
        });
    }
    let mut trace = PipelineTrace::new(tracing);
    trace.record(Stage::Input, || TraceRaster::Rgb(img.clone()));

    let flat = mean_shift_filter(img, &cfg.mean_shift)?;
    let mask = threshold_plane(&rgb_to_gray(&flat), cfg);
    let mask = filter_components_by_area(&mask, cfg.min_area_pre, Connectivity::Eight)?;
    trace.record(Stage::MeanShift, || TraceRaster::Rgb(flat));

    let contours: Vec<Contour> = extract_contours(&mask).into_iter().map(|(c, _)| c).collect();
    let masked = RgbImage::from_fn(img.width(), img.height(), |x, y| {
        if mask.get(x, y) {
            img.get(x, y)
        } else {
            [0, 0, 0]
        }
    });
    let masked = draw_contours(&masked, &contours, cfg.contour_color)?;
    let blurred = gaussian_blur(img, &GaussianKernel::with_size(cfg.blur_kernel)?);

    let composite = RgbImage::from_fn(img.width(), img.height(), |x, y| {
        if mask.get(x, y) {
            masked.get(x, y)
        } else {
            blurred.get(x, y)
        }
    });
    trace.record(Stage::Preprocessed, || TraceRaster::Rgb(composite.clone()));
    Ok((composite, trace))
}

/// Second stage: coarse masks from the composite, then per-object refinement
/// with mean shift and an adaptive Gaussian threshold.
pub fn segment(pre: &RgbImage, cfg: &PipelineConfig, tracing: bool) -> Result<(Vec<ObjectCandidate>, PipelineTrace)> {
    cfg.validate()?;
    let mut trace = PipelineTrace::new(tracing);
    let (w, h) = pre.dimensions();

    let hsv = rgb_to_hsv(pre);
    let gray = match cfg.gray_source {
        GraySource::HsvValue => hsv_value_channel(&hsv),
        GraySource::Luma => rgb_to_gray(pre),
    };
    trace.record(Stage::Hsv, || TraceRaster::Hsv(hsv));

    let coarse = threshold_plane(&gray, cfg);
    let coarse = morph(&coarse, MorphOp::Close, cfg.morph_kernel, 1)?;
    let coarse = dilate(&coarse, cfg.morph_kernel, 1)?;
    let coarse = fill_holes(&coarse);
    let coarse = filter_components_by_area(&coarse, cfg.min_area_seg, Connectivity::Eight)?;
    let components = extract_contours(&coarse);
    trace.record(Stage::CoarseMask, || TraceRaster::Mask(coarse.clone()));
    if trace.is_enabled() {
        let contours: Vec<Contour> = components.iter().map(|(c, _)| c.clone()).collect();
        let drawn = draw_contours(pre, &contours, cfg.contour_color)?;
        trace.record(Stage::CoarseContours, || TraceRaster::Rgb(drawn));
    }

    let (coarse_labels, _) = connected_components(&coarse, Connectivity::Eight);
    let mut candidates = Vec::new();
    for (_, stats) in &components {
        let window = stats.bbox.expand(cfg.refine_margin, w, h);
        let own = |x: usize, y: usize| coarse_labels.get(window.min_x + x, window.min_y + y) == stats.label;
        candidates.extend(refine_region(pre, &window, own, cfg)?);
    }
    candidates.sort_by_key(|c| first_pixel(&c.region));

    if trace.is_enabled() {
        let mut union = BinaryMask::filled(w, h, false);
        for c in &candidates {
            c.region.paint(&mut union);
        }
        trace.record(Stage::RefinedMask, || TraceRaster::Mask(union));
    }
    Ok((candidates, trace))
}

fn refine_region(
    pre: &RgbImage,
    window: &BoundingBox,
    own: impl Fn(usize, usize) -> bool,
    cfg: &PipelineConfig,
) -> Result<Vec<ObjectCandidate>> {
    let sub = pre.crop(window.min_x, window.min_y, window.width(), window.height())?;
    let flat = mean_shift_filter(&sub, &cfg.mean_shift)?;
    let mask = adaptive_threshold_gaussian(&rgb_to_gray(&flat), &cfg.adaptive)?;
    let mask = filter_components_by_area(&mask, cfg.min_area_refine, Connectivity::Eight)?;
    let mask = fill_holes(&mask);
    let mask = dilate(&mask, cfg.morph_kernel, cfg.dilate_iterations)?;

    let (labels, stats) = connected_components(&mask, Connectivity::Eight);
    let mut overlaps = alloc::vec![false; stats.len() + 1];
    for y in 0..labels.height() {
        for x in 0..labels.width() {
            let l = labels.get(x, y);
            if l != 0 && own(x, y) {
                overlaps[l as usize] = true;
            }
        }
    }
    stats
        .into_iter()
        .filter(|s| overlaps[s.label as usize])
        .map(|s| {
            let local = labels.crop(s.bbox.min_x, s.bbox.min_y, s.bbox.width(), s.bbox.height())?;
            let region = RegionMask {
                x0: window.min_x + s.bbox.min_x,
                y0: window.min_y + s.bbox.min_y,
                mask: local.map(|&l| l == s.label),
            };
            let stats = ComponentStats {
                label: 0,
                area: s.area,
                bbox: BoundingBox {
                    min_x: s.bbox.min_x + window.min_x,
                    min_y: s.bbox.min_y + window.min_y,
                    max_x: s.bbox.max_x + window.min_x,
                    max_y: s.bbox.max_y + window.min_y,
                },
                centroid: (s.centroid.0 + window.min_x as f64, s.centroid.1 + window.min_y as f64),
            };
            Ok(ObjectCandidate { region, stats })
        })
        .collect()
}

fn first_pixel(region: &RegionMask) -> (usize, usize) {
    let m = &region.mask;
    let i = m.pixels().iter().position(|&b| b).unwrap_or(0);
    (region.y0 + i / m.width(), region.x0 + i % m.width())
}

/// Cuts the `crop_size` window centered on the candidate's rounded centroid,
/// shifted to stay inside the slide.
pub fn extract_object(
    src: &RgbImage,
    cand: &ObjectCandidate,
    cfg: &PipelineConfig,
    source: &str,
    index: usize,
) -> Result<SegmentedObject> {
    let size = cfg.crop_size;
    if src.width() < size || src.height() < size {
        return Err(Error::ImageTooSmall {
            width: src.width(),
            height: src.height(),
            min_width: size,
            min_height: size,
        });
    }
    let place = |c: f64, extent: usize| -> usize {
        let start = math::round(c) as i64 - (size / 2) as i64;
        start.clamp(0, (extent - size) as i64) as usize
    };
    let x0 = place(cand.stats.centroid.0, src.width());
    let y0 = place(cand.stats.centroid.1, src.height());
    let crop = src.crop(x0, y0, size, size)?;
    let mask = cand.region.window(x0, y0, size, size);
    let green_crop = green_composite(&crop, &mask, cfg.background_color)?;
    let bbox = cand.stats.bbox;
    Ok(SegmentedObject {
        object_id: format!("{source}_{index:04}"),
        source: String::from(source),
        bbox,
        centroid: cand.stats.centroid,
        area: cand.stats.area,
        window: (x0, y0),
        oversize: bbox.width() > size || bbox.height() > size,
        crop,
        mask,
        green_crop,
    })
}

/// Crop pixels where the mask is set, `background` elsewhere.
pub fn green_composite(crop: &RgbImage, mask: &BinaryMask, background: Rgb) -> Result<RgbImage> {
    if !crop.same_shape(mask) {
        return Err(Error::DimensionMismatch);
    }
    Ok(RgbImage::from_fn(crop.width(), crop.height(), |x, y| {
        if mask.get(x, y) {
            crop.get(x, y)
        } else {
            background
        }
    }))
}

/// Full pipeline over one slide; ids are `<source>_<index>` in raster order.
pub fn run_pipeline(img: &RgbImage, cfg: &PipelineConfig, source: &str) -> Result<Vec<SegmentedObject>> {
    run_pipeline_traced(img, cfg, source, false).map(|(objects, _)| objects)
}

pub fn run_pipeline_traced(
    img: &RgbImage,
    cfg: &PipelineConfig,
    source: &str,
    tracing: bool,
) -> Result<(Vec<SegmentedObject>, PipelineTrace)> {
    let (pre, mut trace) = preprocess(img, cfg, tracing)?;
    let (candidates, seg_trace) = segment(&pre, cfg, tracing)?;
    trace.merge(seg_trace);
    let objects = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| extract_object(img, c, cfg, source, i))
        .collect::<Result<Vec<_>>>()?;
    if tracing {
        let mut union = BinaryMask::filled(img.width(), img.height(), false);
        for c in &candidates {
            c.region.paint(&mut union);
        }
        let composite = green_composite(img, &union, cfg.background_color)?;
        trace.record(Stage::GreenComposite, || TraceRaster::Rgb(composite));
    }
    Ok((objects, trace))
}
