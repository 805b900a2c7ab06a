use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{BBox, GridDims};

/// Temporal unit the pipeline gates on.
pub const CLIP_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Intent {
    Crossing,
    NotCrossing,
    #[default]
    Unknown,
}

/// Per-frame sidecar (`meta.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub frame_id: u64,
    /// Ego speed in km/h.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_ego: Option<f64>,
    #[serde(default)]
    pub intent: Intent,
    #[serde(default)]
    pub bboxes: Vec<BBox>,
    #[serde(default)]
    pub scenario_tags: BTreeSet<String>,
}

impl FrameMeta {
    pub fn new(frame_id: u64, v_ego: f64) -> Self {
        Self {
            frame_id,
            v_ego: Some(v_ego),
            intent: Intent::Unknown,
            bboxes: Vec::new(),
            scenario_tags: BTreeSet::new(),
        }
    }

    pub fn validate(&self, dims: GridDims) -> Result<()> {
        if let Some(v) = self.v_ego {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(format!(
                    "frame {}: v_ego {v} must be finite and >= 0",
                    self.frame_id
                )));
            }
        }
        for b in &self.bboxes {
            b.validate(dims)?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Resolved locations of one frame's artifacts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FramePaths {
    pub gaze: PathBuf,
    pub mask: PathBuf,
    pub nearness: PathBuf,
    pub prediction: PathBuf,
    /// Prediction of a model trained on SAGE ground truth, when distinct.
    pub prediction_sage: Option<PathBuf>,
    /// Precomputed SAGE ground truth; built from gaze + mask when absent.
    pub sage: Option<PathBuf>,
    pub meta: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRef {
    pub meta: FrameMeta,
    pub paths: FramePaths,
}

impl FrameRef {
    pub fn frame_id(&self) -> u64 {
        self.meta.frame_id
    }
}

/// Sixteen consecutive frames; the last one is what the gates look at.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipWindow {
    clip_id: String,
    frames: Vec<FrameRef>,
}

impl ClipWindow {
    pub fn new(clip_id: impl Into<String>, frames: Vec<FrameRef>) -> Result<Self> {
        let clip_id = clip_id.into();
        if frames.len() != CLIP_LEN {
            return Err(Error::invalid(format!(
                "clip {clip_id} has {} frames, expected {CLIP_LEN}",
                frames.len()
            )));
        }
        if frames
            .windows(2)
            .any(|w| w[0].frame_id() >= w[1].frame_id())
        {
            return Err(Error::invalid(format!(
                "clip {clip_id}: frame ids must be strictly increasing"
            )));
        }
        Ok(Self { clip_id, frames })
    }

    /// Clip built from bare metadata, for in-memory providers.
    pub fn from_metas(clip_id: impl Into<String>, metas: Vec<FrameMeta>) -> Result<Self> {
        let frames = metas
            .into_iter()
            .map(|meta| FrameRef {
                meta,
                paths: FramePaths::default(),
            })
            .collect();
        Self::new(clip_id, frames)
    }

    pub fn clip_id(&self) -> &str {
        &self.clip_id
    }

    pub fn frames(&self) -> &[FrameRef] {
        &self.frames
    }

    pub fn last(&self) -> &FrameRef {
        self.frames.last().expect("clip is never empty")
    }

    pub fn scenario_tags(&self) -> BTreeSet<String> {
        self.frames
            .iter()
            .flat_map(|f| f.meta.scenario_tags.iter().cloned())
            .collect()
    }
}
