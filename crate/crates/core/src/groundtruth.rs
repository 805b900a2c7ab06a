//! SAGE ground truth: driving-relevant instance masks superimposed on a gaze map.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{self, BinaryMask, GridDims, SalMap};

/// Object categories kept for the semantic channel. Everything else,
/// including the implicit background class, is dropped.
pub const DRIVING_CATEGORIES: [&str; 11] = [
    "person",
    "bicycle",
    "car",
    "motorcycle",
    "bus",
    "truck",
    "traffic light",
    "fire hydrant",
    "stop sign",
    "parking meter",
    "bench",
];

pub const BACKGROUND: &str = "background";

pub const DEFAULT_MIN_SCORE: f32 = 0.5;

/// One detected object instance with its footprint.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceDetection {
    pub class_name: String,
    pub mask: BinaryMask,
    pub score: f32,
}

impl InstanceDetection {
    pub fn new(class_name: impl Into<String>, mask: BinaryMask, score: f32) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::invalid(format!(
                "detector score {score} outside [0, 1]"
            )));
        }
        Ok(Self {
            class_name: class_name.into(),
            mask,
            score,
        })
    }
}

/// Which categories make it into the semantic mask, and the confidence floor.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryFilter {
    keep: BTreeSet<String>,
    min_score: f32,
}

impl Default for CategoryFilter {
    fn default() -> Self {
        Self {
            keep: DRIVING_CATEGORIES.iter().map(|s| s.to_string()).collect(),
            min_score: DEFAULT_MIN_SCORE,
        }
    }
}

impl CategoryFilter {
    pub fn new<I, S>(keep: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let keep: BTreeSet<String> = keep.into_iter().map(Into::into).collect();
        if keep.is_empty() {
            return Err(Error::invalid(
                "category filter must keep at least one class",
            ));
        }
        if keep.contains(BACKGROUND) {
            return Err(Error::invalid("`background` cannot be a kept category"));
        }
        Ok(Self {
            keep,
            min_score: DEFAULT_MIN_SCORE,
        })
    }

    pub fn with_min_score(mut self, min_score: f32) -> Result<Self> {
        if !(0.0..=1.0).contains(&min_score) {
            return Err(Error::invalid(format!(
                "score threshold {min_score} outside [0, 1]"
            )));
        }
        self.min_score = min_score;
        Ok(self)
    }

    pub fn keeps(&self, class_name: &str) -> bool {
        self.keep.contains(class_name)
    }

    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.keep.iter().map(String::as_str)
    }

    pub fn min_score(&self) -> f32 {
        self.min_score
    }

    fn accepts(&self, inst: &InstanceDetection) -> bool {
        self.keeps(&inst.class_name) && inst.score >= self.min_score
    }
}

/// Object-vs-background mask: union of every kept instance footprint.
pub fn union_mask(
    instances: &[InstanceDetection],
    filter: &CategoryFilter,
    dims: GridDims,
) -> Result<BinaryMask> {
    let mut out = BinaryMask::zeros(dims);
    for inst in instances {
        dims.ensure_eq(inst.mask.dims())?;
        if filter.accepts(inst) {
            out.or_assign(&inst.mask)?;
        }
    }
    Ok(out)
}

/// Pixelwise maximum of a max-normalized gaze map and the mask at full saliency.
pub fn superimpose(gaze: &SalMap, mask: &BinaryMask) -> Result<SalMap> {
    gaze.dims().ensure_eq(mask.dims())?;
    let max = gaze.max();
    if max > 1.0 {
        return Err(Error::invalid(format!(
            "gaze map must be max-normalized before superimposition (max {max})"
        )));
    }
    let data = gaze
        .data()
        .iter()
        .zip(mask.data())
        .map(|(&g, &m)| if m == 1 { 1.0 } else { g })
        .collect();
    Ok(SalMap::from_raw(gaze.dims(), data))
}

/// Full ground-truth construction for one frame at `dims`.
pub fn build_sage_frame(
    gaze: &SalMap,
    instances: &[InstanceDetection],
    filter: &CategoryFilter,
    dims: GridDims,
) -> Result<SalMap> {
    let gaze = map::normalize_max(&map::resize_bilinear(gaze, dims));
    let mask = union_mask(instances, filter, dims)?;
    superimpose(&gaze, &mask)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub class_name: String,
    pub score: f32,
    pub mask_path: PathBuf,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum InstanceDoc {
    List(Vec<InstanceRecord>),
    Wrapped { instances: Vec<InstanceRecord> },
}

/// Reads a per-frame instance document; `mask_path`s resolve relative to it.
pub fn load_instances(path: impl AsRef<Path>) -> Result<Vec<InstanceDetection>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: InstanceDoc = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let records = match doc {
        InstanceDoc::List(r) | InstanceDoc::Wrapped { instances: r } => r,
    };
    let base = path.parent().unwrap_or(Path::new("."));
    records
        .into_iter()
        .map(|rec| {
            let mask = map::load_mask(base.join(&rec.mask_path))?;
            InstanceDetection::new(rec.class_name, mask, rec.score)
        })
        .collect()
}
