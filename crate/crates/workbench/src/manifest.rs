//! Line-delimited JSON manifest of segmented objects and their labels.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::{Result, WorkbenchError};

pub const NUM_CLASSES: u8 = 5;

/// Classes excluded from classifier training.
pub const EXCLUDED_CLASS: u8 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ClassInfo {
    pub id: u8,
    pub name: &'static str,
    pub reference_count: usize,
}

pub const CLASS_TABLE: [ClassInfo; 5] = [
    ClassInfo {
        id: 1,
        name: "Corylus avellana (well-developed)",
        reference_count: 1850,
    },
    ClassInfo {
        id: 2,
        name: "Corylus avellana (anomalous)",
        reference_count: 903,
    },
    ClassInfo {
        id: 3,
        name: "Alnus (well-developed)",
        reference_count: 9558,
    },
    ClassInfo {
        id: 4,
        name: "Debris",
        reference_count: 999,
    },
    ClassInfo {
        id: 5,
        name: "Cupressaceae",
        reference_count: 43,
    },
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    #[default]
    Unlabeled,
    Class(u8),
    Discarded,
}

impl Label {
    pub fn class(n: u8) -> Result<Label> {
        if (1..=NUM_CLASSES).contains(&n) {
            Ok(Label::Class(n))
        } else {
            Err(WorkbenchError::Invalid(format!("class must be 1..={NUM_CLASSES}, got {n}")))
        }
    }

    pub fn status(self) -> Status {
        match self {
            Label::Unlabeled => Status::Unlabeled,
            Label::Class(_) => Status::Labeled,
            Label::Discarded => Status::Discarded,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LabelRepr {
    Class(u64),
    Word(String),
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Label::Unlabeled => s.serialize_str("unlabeled"),
            Label::Discarded => s.serialize_str("discarded"),
            Label::Class(n) => s.serialize_u8(n),
        }
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        match LabelRepr::deserialize(d)? {
            LabelRepr::Class(n) if (1..=NUM_CLASSES as u64).contains(&n) => Ok(Label::Class(n as u8)),
            LabelRepr::Class(n) => Err(D::Error::custom(format!("class {n} out of range 1..=5"))),
            LabelRepr::Word(w) if w == "unlabeled" => Ok(Label::Unlabeled),
            LabelRepr::Word(w) if w == "discarded" => Ok(Label::Discarded),
            LabelRepr::Word(w) => Err(D::Error::custom(format!("unknown label {w:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Unlabeled,
    Labeled,
    Discarded,
}

impl std::str::FromStr for Status {
    type Err = WorkbenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unlabeled" => Ok(Status::Unlabeled),
            "labeled" => Ok(Status::Labeled),
            "discarded" => Ok(Status::Discarded),
            _ => Err(WorkbenchError::Invalid(format!("unknown status {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub object_id: String,
    pub source_image: String,
    /// Inclusive `[min_x, min_y, max_x, max_y]` in slide pixels.
    pub bbox: [usize; 4],
    pub centroid: [f64; 2],
    /// Paths relative to the manifest's directory.
    pub crop: String,
    pub mask: String,
    pub green_crop: String,
    #[serde(default)]
    pub label: Label,
    #[serde(default)]
    pub labeled_by: Option<String>,
    /// RFC 3339 time of the last label change.
    #[serde(default)]
    pub labeled_at: Option<String>,
    /// Number of label writes this record has seen.
    #[serde(default)]
    pub revision: u64,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl ManifestRecord {
    pub fn new(object_id: &str, source_image: &str, bbox: [usize; 4], centroid: [f64; 2]) -> Self {
        ManifestRecord {
            object_id: object_id.to_string(),
            source_image: source_image.to_string(),
            bbox,
            centroid,
            crop: format!("crops/{object_id}.png"),
            mask: format!("masks/{object_id}.png"),
            green_crop: format!("green/{object_id}.png"),
            label: Label::Unlabeled,
            labeled_by: None,
            labeled_at: None,
            revision: 0,
            extra: Map::new(),
        }
    }
}

/// Parses manifest text; `path` only labels errors.
pub fn parse_manifest(text: &str, path: &Path) -> Result<Vec<ManifestRecord>> {
    let mut seen = HashMap::new();
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| WorkbenchError::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let rec: ManifestRecord = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        if let Some(first) = seen.insert(rec.object_id.clone(), line_no) {
            return Err(parse_err(format!("duplicate object_id {:?} (first on line {first})", rec.object_id)));
        }
        records.push(rec);
    }
    Ok(records)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    let text = fs::read_to_string(path).map_err(|source| WorkbenchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_manifest(&text, path)
}

pub fn render_manifest(records: &[ManifestRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("manifest records serialize"));
        out.push('\n');
    }
    out
}

/// Writes a sibling temp file, syncs it and renames it over `path`, so a crash
/// leaves either the old or the new manifest.
pub fn write_manifest(path: &Path, records: &[ManifestRecord]) -> Result<()> {
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |source| WorkbenchError::Io { path: p, source }
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(io(&tmp))?;
        f.write_all(render_manifest(records).as_bytes()).map_err(io(&tmp))?;
        f.sync_all().map_err(io(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io(path))?;
    if let Ok(d) = fs::File::open(&dir) {
        let _ = d.sync_all();
    }
    Ok(())
}

/// Appends records whose ids are new; existing records keep their labels.
pub fn merge_records(existing: &mut Vec<ManifestRecord>, incoming: Vec<ManifestRecord>) -> usize {
    let known: std::collections::HashSet<String> = existing.iter().map(|r| r.object_id.clone()).collect();
    let before = existing.len();
    existing.extend(incoming.into_iter().filter(|r| !known.contains(&r.object_id)));
    existing.len() - before
}

/// A requested label change.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelUpdate {
    Class(u8),
    Discard,
    Unlabel,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Progress {
    pub total: usize,
    pub labeled: usize,
    pub discarded: usize,
    pub unlabeled: usize,
    /// Labeled objects per class, all five classes present.
    pub per_class: BTreeMap<u8, usize>,
    /// `100 * labeled / total`, 0 for an empty manifest.
    pub percent_labeled: f64,
    /// `100 * (labeled + discarded) / total`.
    pub percent_reviewed: f64,
}

/// In-memory manifest with an id index.
#[derive(Clone, Debug, Default)]
pub struct Manifest {
    records: Vec<ManifestRecord>,
    index: HashMap<String, usize>,
}

impl Manifest {
    pub fn new(records: Vec<ManifestRecord>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, r) in records.iter().enumerate() {
            if index.insert(r.object_id.clone(), i).is_some() {
                return Err(WorkbenchError::Invalid(format!("duplicate object_id {:?}", r.object_id)));
            }
        }
        Ok(Manifest { records, index })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::new(read_manifest(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_manifest(path, &self.records)
    }

    pub fn records(&self) -> &[ManifestRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<ManifestRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ManifestRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    /// Sum of record revisions: bumps by one on every label write.
    pub fn revision(&self) -> u64 {
        self.records.iter().map(|r| r.revision).sum()
    }

    pub fn apply(&mut self, id: &str, update: LabelUpdate, annotator: Option<&str>, at: &str) -> Result<&ManifestRecord> {
        let label = match update {
            LabelUpdate::Class(n) => Label::class(n)?,
            LabelUpdate::Discard => Label::Discarded,
            LabelUpdate::Unlabel => Label::Unlabeled,
        };
        let &i = self
            .index
            .get(id)
            .ok_or_else(|| WorkbenchError::Invalid(format!("unknown object {id:?}")))?;
        let r = &mut self.records[i];
        r.label = label;
        r.labeled_by = annotator.map(str::to_string);
        r.labeled_at = Some(at.to_string());
        r.revision += 1;
        Ok(r)
    }

    pub fn progress(&self) -> Progress {
        let mut per_class: BTreeMap<u8, usize> = (1..=NUM_CLASSES).map(|c| (c, 0)).collect();
        let (mut discarded, mut unlabeled) = (0, 0);
        for r in &self.records {
            match r.label {
                Label::Class(c) => *per_class.entry(c).or_default() += 1,
                Label::Discarded => discarded += 1,
                Label::Unlabeled => unlabeled += 1,
            }
        }
        let total = self.records.len();
        let labeled = total - discarded - unlabeled;
        let pct = |n: usize| if total == 0 { 0.0 } else { 100.0 * n as f64 / total as f64 };
        Progress {
            total,
            labeled,
            discarded,
            unlabeled,
            per_class,
            percent_labeled: pct(labeled),
            percent_reviewed: pct(labeled + discarded),
        }
    }
}
