//! Declarative scene description, read from TOML.
//!
//! Coordinates are in pixel-index units: pixel `(row, col)` has its center at
//! `x = col`, `y = row`. Frame ranges are inclusive `[first, last]`.
//!
//! ```toml
//! name = "crossing"
//! height = 128
//! width = 256
//! n_frames = 160
//! center_bias = 0.5
//! scenario_tags = ["crossing"]
//! speed = 6.0                     # or one value per frame, or
//!                                 # [{ frames = [0, 79], v = 8.0 }, ...]
//!
//! [prediction]                    # simulated raw saliency-model output
//! sigma_scale = 1.5
//! object_response = 0.1
//! noise = 0.02
//!
//! [[objects]]
//! class_name = "person"
//! shape = "ellipse"               # or "rect"
//! half_width = 4.0
//! half_height = 10.0
//! start = [20.0, 80.0]            # center at the first active frame (x, y)
//! velocity = [1.5, 0.0]           # pixels per frame
//! scale_rate = 0.0                # fractional growth per frame
//! nearness = 0.7
//! nearness_rate = 0.0
//! frames = [0, 159]               # optional active range
//!
//! [[gaze]]
//! at = [128.0, 56.0]              # or `follow = <object index>`
//! velocity = [0.0, 0.0]
//! sigma = 14.0
//! weight = 1.0
//! jitter = 1.5                    # seeded per-frame displacement, pixels
//!
//! [[crossing_events]]
//! frames = [0, 159]
//! object = 0
//!
//! [[tags]]
//! tag = "intersection"
//! frames = [0, 63]
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{CLIP_LEN, PERSON};
use crate::map::GridDims;

pub type FrameRange = [u64; 2];

fn in_range(range: &Option<FrameRange>, frame: u64) -> bool {
    range.is_none_or(|[a, b]| (a..=b).contains(&frame))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Rect,
    Ellipse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObject {
    pub class_name: String,
    pub shape: Shape,
    pub half_width: f64,
    pub half_height: f64,
    pub start: [f64; 2],
    #[serde(default)]
    pub velocity: [f64; 2],
    #[serde(default)]
    pub scale_rate: f64,
    pub nearness: f64,
    #[serde(default)]
    pub nearness_rate: f64,
    #[serde(default)]
    pub frames: Option<FrameRange>,
}

/// Position and extent of an object at one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub shape: Shape,
    pub cx: f64,
    pub cy: f64,
    pub half_width: f64,
    pub half_height: f64,
    pub nearness: f64,
}

impl Placement {
    /// Center-of-pixel inclusion test.
    pub fn covers(&self, row: usize, col: usize) -> bool {
        let dx = (col as f64 - self.cx) / self.half_width;
        let dy = (row as f64 - self.cy) / self.half_height;
        match self.shape {
            Shape::Rect => dx.abs() <= 1.0 && dy.abs() <= 1.0,
            Shape::Ellipse => dx * dx + dy * dy <= 1.0,
        }
    }
}

impl SceneObject {
    pub fn active(&self, frame: u64) -> bool {
        in_range(&self.frames, frame)
    }

    /// Placement at `frame`; motion is measured from the first active frame.
    pub fn placement(&self, frame: u64) -> Placement {
        let t = frame.saturating_sub(self.frames.map_or(0, |r| r[0])) as f64;
        let scale = 1.0 + self.scale_rate * t;
        Placement {
            shape: self.shape,
            cx: self.start[0] + self.velocity[0] * t,
            cy: self.start[1] + self.velocity[1] * t,
            half_width: self.half_width * scale,
            half_height: self.half_height * scale,
            nearness: self.nearness + self.nearness_rate * t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GazeTrack {
    #[serde(default)]
    pub at: Option<[f64; 2]>,
    /// Index into `objects`; the fixation tracks that object's center.
    #[serde(default)]
    pub follow: Option<usize>,
    #[serde(default)]
    pub velocity: [f64; 2],
    pub sigma: f64,
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default)]
    pub jitter: f64,
    #[serde(default)]
    pub frames: Option<FrameRange>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedSegment {
    pub frames: FrameRange,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpeedProfile {
    Constant(f64),
    PerFrame(Vec<f64>),
    Segments(Vec<SpeedSegment>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossingEvent {
    pub frames: FrameRange,
    /// Person object doing the crossing; informational.
    #[serde(default)]
    pub object: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagRange {
    pub tag: String,
    pub frames: FrameRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionModel {
    /// Blur of the simulated model relative to the gaze spread.
    #[serde(default = "default_sigma_scale")]
    pub sigma_scale: f64,
    /// Response on driving-relevant objects, before max-normalization.
    #[serde(default = "default_object_response")]
    pub object_response: f64,
    /// Amplitude of seeded uniform noise.
    #[serde(default = "default_noise")]
    pub noise: f64,
}

fn default_sigma_scale() -> f64 {
    1.5
}

fn default_object_response() -> f64 {
    0.1
}

fn default_noise() -> f64 {
    0.02
}

impl Default for PredictionModel {
    fn default() -> Self {
        Self {
            sigma_scale: default_sigma_scale(),
            object_response: default_object_response(),
            noise: default_noise(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub name: String,
    pub height: usize,
    pub width: usize,
    pub n_frames: u64,
    #[serde(default)]
    pub center_bias: f64,
    #[serde(default)]
    pub scenario_tags: Vec<String>,
    pub speed: SpeedProfile,
    #[serde(default)]
    pub prediction: PredictionModel,
    #[serde(default)]
    pub objects: Vec<SceneObject>,
    #[serde(default)]
    pub gaze: Vec<GazeTrack>,
    #[serde(default)]
    pub crossing_events: Vec<CrossingEvent>,
    #[serde(default)]
    pub tags: Vec<TagRange>,
}

impl SceneSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SceneSpec =
            toml::from_str(text).map_err(|e| Error::invalid(format!("scene spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn dims(&self) -> GridDims {
        GridDims {
            height: self.height,
            width: self.width,
        }
    }

    pub fn n_clips(&self) -> u64 {
        self.n_frames / CLIP_LEN as u64
    }

    pub fn speed_at(&self, frame: u64) -> f64 {
        match &self.speed {
            SpeedProfile::Constant(v) => *v,
            SpeedProfile::PerFrame(v) => v[frame as usize],
            SpeedProfile::Segments(s) => s
                .iter()
                .find(|seg| (seg.frames[0]..=seg.frames[1]).contains(&frame))
                .map(|seg| seg.v)
                .expect("validated: segments cover every frame"),
        }
    }

    pub fn crossing_at(&self, frame: u64) -> bool {
        self.crossing_events
            .iter()
            .any(|e| (e.frames[0]..=e.frames[1]).contains(&frame))
    }

    pub fn tags_at(&self, frame: u64) -> impl Iterator<Item = &str> {
        self.scenario_tags.iter().map(String::as_str).chain(
            self.tags
                .iter()
                .filter(move |t| (t.frames[0]..=t.frames[1]).contains(&frame))
                .map(|t| t.tag.as_str()),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::invalid(format!("scene `{}`: {msg}", self.name)));
        let dims = GridDims::new(self.height, self.width)?;
        let clip = CLIP_LEN as u64;
        if self.n_frames < clip || !self.n_frames.is_multiple_of(clip) {
            return fail(format!(
                "n_frames {} must be a positive multiple of {clip}",
                self.n_frames
            ));
        }
        if !(0.0..=1.0).contains(&self.center_bias) {
            return fail(format!("center_bias {} outside [0, 1]", self.center_bias));
        }
        let check_range = |what: &str, r: &FrameRange| -> Result<()> {
            if r[0] > r[1] || r[1] >= self.n_frames {
                return Err(Error::invalid(format!(
                    "scene `{}`: {what} frame range {r:?} invalid for {} frames",
                    self.name, self.n_frames
                )));
            }
            Ok(())
        };

        match &self.speed {
            SpeedProfile::Constant(v) if !(v.is_finite() && *v >= 0.0) => {
                return fail(format!("speed {v} must be >= 0"))
            }
            SpeedProfile::PerFrame(v) => {
                if v.len() as u64 != self.n_frames {
                    return fail(format!(
                        "{} speed values for {} frames",
                        v.len(),
                        self.n_frames
                    ));
                }
                if v.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                    return fail("speeds must be >= 0".into());
                }
            }
            SpeedProfile::Segments(segs) => {
                for s in segs {
                    check_range("speed segment", &s.frames)?;
                    if !(s.v.is_finite() && s.v >= 0.0) {
                        return fail(format!("speed {} must be >= 0", s.v));
                    }
                }
                for f in 0..self.n_frames {
                    let n = segs
                        .iter()
                        .filter(|s| (s.frames[0]..=s.frames[1]).contains(&f))
                        .count();
                    if n != 1 {
                        return fail(format!("frame {f} covered by {n} speed segments"));
                    }
                }
            }
            SpeedProfile::Constant(_) => {}
        }

        let p = &self.prediction;
        if p.sigma_scale <= 0.0 || p.object_response < 0.0 || p.noise < 0.0 {
            return fail("prediction parameters must be non-negative (sigma_scale > 0)".into());
        }

        for (i, o) in self.objects.iter().enumerate() {
            if o.half_width <= 0.0 || o.half_height <= 0.0 {
                return fail(format!("object {i}: half extents must be > 0"));
            }
            if let Some(r) = &o.frames {
                check_range("object", r)?;
            }
            for f in (0..self.n_frames).filter(|&f| o.active(f)) {
                let pl = o.placement(f);
                if !(0.0..=1.0).contains(&pl.nearness) {
                    return fail(format!(
                        "object {i}: nearness {} at frame {f} outside [0, 1]",
                        pl.nearness
                    ));
                }
                if pl.half_width <= 0.0 || pl.half_height <= 0.0 {
                    return fail(format!("object {i} collapses at frame {f}"));
                }
                if !super::render::footprint_visible(&pl, dims) {
                    return fail(format!("object {i} leaves the grid at frame {f}"));
                }
            }
        }

        for (i, g) in self.gaze.iter().enumerate() {
            if g.sigma <= 0.0 || g.weight < 0.0 || g.jitter < 0.0 {
                return fail(format!(
                    "gaze track {i}: sigma > 0, weight and jitter >= 0 required"
                ));
            }
            match (g.at, g.follow) {
                (Some(_), None) => {}
                (None, Some(idx)) if idx < self.objects.len() => {}
                (None, Some(idx)) => {
                    return fail(format!("gaze track {i} follows unknown object {idx}"))
                }
                _ => {
                    return fail(format!(
                        "gaze track {i} needs exactly one of `at` or `follow`"
                    ))
                }
            }
            if let Some(r) = &g.frames {
                check_range("gaze", r)?;
            }
        }

        for e in &self.crossing_events {
            check_range("crossing event", &e.frames)?;
            if let Some(idx) = e.object {
                match self.objects.get(idx) {
                    Some(o) if o.class_name == PERSON => {}
                    _ => return fail(format!("crossing event refers to non-person object {idx}")),
                }
            }
        }
        for t in &self.tags {
            check_range("tag", &t.frames)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        name = "t"
        height = 16
        width = 32
        n_frames = 32
        speed = 10.0
        [[objects]]
        class_name = "car"
        shape = "rect"
        half_width = 3.0
        half_height = 2.0
        start = [10.0, 8.0]
        nearness = 0.8
    "#;

    #[test]
    fn parses_minimal_spec() {
        let s = SceneSpec::from_toml(MINIMAL).unwrap();
        assert_eq!(s.n_clips(), 2);
        assert_eq!(s.speed_at(31), 10.0);
        assert_eq!(s.prediction, PredictionModel::default());
    }

    #[test]
    fn rejects_bad_frame_counts_and_ranges() {
        let bad = MINIMAL.replace("n_frames = 32", "n_frames = 20");
        assert!(SceneSpec::from_toml(&bad).is_err());
        let bad = MINIMAL.replace("speed = 10.0", "speed = [1.0, 2.0]");
        assert!(SceneSpec::from_toml(&bad).is_err());
        let bad = format!("{MINIMAL}\n[[crossing_events]]\nframes = [0, 40]\n");
        assert!(SceneSpec::from_toml(&bad).is_err());
    }

    #[test]
    fn rejects_objects_leaving_the_grid() {
        let bad = MINIMAL.replace(
            "start = [10.0, 8.0]",
            "start = [10.0, 8.0]\nvelocity = [2.0, 0.0]",
        );
        let err = SceneSpec::from_toml(&bad).unwrap_err();
        assert!(err.to_string().contains("leaves the grid"), "{err}");
    }

    #[test]
    fn speed_segments_must_tile() {
        let segs = MINIMAL.replace(
            "speed = 10.0",
            "speed = [{ frames = [0, 15], v = 5.0 }, { frames = [16, 31], v = 30.0 }]",
        );
        let s = SceneSpec::from_toml(&segs).unwrap();
        assert_eq!((s.speed_at(15), s.speed_at(16)), (5.0, 30.0));
        let gap = MINIMAL.replace(
            "speed = 10.0",
            "speed = [{ frames = [0, 14], v = 5.0 }, { frames = [16, 31], v = 30.0 }]",
        );
        assert!(SceneSpec::from_toml(&gap).is_err());
    }

    #[test]
    fn crossing_needs_a_person() {
        let bad = format!("{MINIMAL}\n[[crossing_events]]\nframes = [0, 3]\nobject = 0\n");
        assert!(SceneSpec::from_toml(&bad).is_err());
    }

    #[test]
    fn rect_and_ellipse_inclusion() {
        let rect = Placement {
            shape: Shape::Rect,
            cx: 2.0,
            cy: 2.0,
            half_width: 1.0,
            half_height: 1.0,
            nearness: 1.0,
        };
        assert!(rect.covers(1, 1) && rect.covers(3, 3) && !rect.covers(0, 2));
        let ellipse = Placement {
            shape: Shape::Ellipse,
            ..rect
        };
        assert!(ellipse.covers(2, 1) && !ellipse.covers(1, 1));
    }
}
