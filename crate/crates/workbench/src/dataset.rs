//! Manifest to feature matrix, and the feature matrix text format.
//!
//! ```text
//! # pollen-features kind=hog dimension=2916 count=2
//! obj_0001<TAB>3<TAB>0.0125 0.25 ...
//! obj_0002<TAB>1<TAB>...
//! ```

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use pollen_core::features::{DescriptorKind, FeatureConfig};
use pollen_core::learn::LabeledSet;

use crate::imageio::load_rgb;
use crate::manifest::{Label, ManifestRecord, EXCLUDED_CLASS};
use crate::{Result, WorkbenchError};

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    pub kind: DescriptorKind,
    pub ids: Vec<String>,
    pub set: LabeledSet,
}

/// Records that feed classifier training: labeled, not discarded, not the
/// excluded class.
pub fn trainable(records: &[ManifestRecord]) -> Vec<&ManifestRecord> {
    records
        .iter()
        .filter(|r| matches!(r.label, Label::Class(c) if c != EXCLUDED_CLASS))
        .collect()
}

/// Loads the green crops of trainable records (relative to `root`) and
/// extracts one descriptor per object, in manifest order.
pub fn export_dataset(records: &[ManifestRecord], root: &Path, features: &FeatureConfig) -> Result<FeatureTable> {
    let rows = trainable(records);
    let classes: std::collections::BTreeSet<u8> = rows
        .iter()
        .filter_map(|r| match r.label {
            Label::Class(c) => Some(c),
            _ => None,
        })
        .collect();
    if classes.len() < 2 {
        return Err(WorkbenchError::Invalid(format!(
            "export needs at least 2 usable classes, found {}",
            classes.len()
        )));
    }
    let vectors = rows
        .par_iter()
        .map(|r| {
            let crop = load_rgb(&root.join(&r.green_crop))?;
            Ok(features.extract(&crop)?.values)
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = rows
        .iter()
        .map(|r| match r.label {
            Label::Class(c) => c,
            _ => unreachable!(),
        })
        .collect();
    Ok(FeatureTable {
        kind: features.kind,
        ids: rows.iter().map(|r| r.object_id.clone()).collect(),
        set: LabeledSet::new(vectors, labels)?,
    })
}

pub fn render_features(t: &FeatureTable) -> String {
    let mut out = format!(
        "# pollen-features kind={} dimension={} count={}\n",
        t.kind.name(),
        t.set.dimension(),
        t.set.len()
    );
    for ((id, row), label) in t.ids.iter().zip(t.set.rows()).zip(t.set.labels()) {
        let _ = write!(out, "{id}\t{label}\t");
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{v:?}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_features(text: &str, path: &Path) -> Result<FeatureTable> {
    let err = |line: usize, message: String| WorkbenchError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty feature file".into()))?;
    let header = header
        .strip_prefix("# pollen-features ")
        .ok_or_else(|| err(1, "missing pollen-features header".into()))?;
    let (mut kind, mut dim, mut count) = (None, None, None);
    for field in header.split_whitespace() {
        match field.split_once('=') {
            Some(("kind", v)) => kind = Some(v.parse::<DescriptorKind>().map_err(|e| err(1, e.to_string()))?),
            Some(("dimension", v)) => dim = v.parse::<usize>().ok(),
            Some(("count", v)) => count = v.parse::<usize>().ok(),
            _ => return Err(err(1, format!("bad header field {field:?}"))),
        }
    }
    let (Some(kind), Some(dim), Some(count)) = (kind, dim, count) else {
        return Err(err(1, "header needs kind, dimension and count".into()));
    };
    let (mut ids, mut rows, mut labels) = (Vec::new(), Vec::new(), Vec::new());
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, '\t');
        let (Some(id), Some(label), Some(values)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(err(i + 1, "expected id, label and values".into()));
        };
        let label: u8 = label.parse().map_err(|_| err(i + 1, format!("bad label {label:?}")))?;
        let row = values
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| err(i + 1, e.to_string()))?;
        if row.len() != dim {
            return Err(err(i + 1, format!("expected {dim} values, found {}", row.len())));
        }
        ids.push(id.to_string());
        rows.push(row);
        labels.push(label);
    }
    if rows.len() != count {
        return Err(err(1, format!("header says {count} rows, found {}", rows.len())));
    }
    Ok(FeatureTable {
        kind,
        ids,
        set: LabeledSet::new(rows, labels)?,
    })
}

pub fn write_features(path: &Path, t: &FeatureTable) -> Result<()> {
    std::fs::write(path, render_features(t)).map_err(|source| WorkbenchError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_features(path: &Path) -> Result<FeatureTable> {
    let text = std::fs::read_to_string(path).map_err(|source| WorkbenchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_features(&text, path)
}
