//! Prediction composition: depth amplification, pedestrian box amplification,
//! and the speed/intent-gated pipeline that strings them together.

mod clip;
mod provider;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use clip::{ClipWindow, FrameMeta, FramePaths, FrameRef, Intent, CLIP_LEN};
pub use provider::{
    ConstantMap, Counting, DetectorProvider, Failing, FileDetector, FileIntent, FileNearness,
    FileSaliency, FixedDetector, IntentProvider, NearnessProvider, Provider, ProviderBundle,
    SaliencyProvider, ScriptedIntent,
};

use crate::error::{Error, Result};
use crate::map::{self, BBox, SalMap};

pub const DEFAULT_V_THRESH: f64 = 15.0;
pub const DEFAULT_K: f64 = 2.0;
pub const PERSON: &str = "person";

/// What happens to the composed map before it leaves the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClampPolicy {
    #[default]
    RenormalizeMax,
    ClipAtOne,
    None,
}

impl ClampPolicy {
    pub fn apply(self, map: &SalMap) -> SalMap {
        match self {
            ClampPolicy::RenormalizeMax => map::normalize_max(map),
            ClampPolicy::ClipAtOne => map
                .map_values(|v| v.min(1.0))
                .expect("clipping keeps values valid"),
            ClampPolicy::None => map.clone(),
        }
    }
}

impl FromStr for ClampPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "renormalize_max" | "renormalize-max" => Ok(Self::RenormalizeMax),
            "clip_at_one" | "clip-at-one" => Ok(Self::ClipAtOne),
            "none" => Ok(Self::None),
            other => Err(Error::invalid(format!("unknown clamp policy `{other}`"))),
        }
    }
}

impl fmt::Display for ClampPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClampPolicy::RenormalizeMax => "renormalize_max",
            ClampPolicy::ClipAtOne => "clip_at_one",
            ClampPolicy::None => "none",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// km/h; the pedestrian branch only runs at or below this speed.
    pub v_thresh: f64,
    /// Amplification factor for pedestrian boxes.
    pub k: f64,
    pub clamp: ClampPolicy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            v_thresh: DEFAULT_V_THRESH,
            k: DEFAULT_K,
            clamp: ClampPolicy::default(),
        }
    }
}

impl PipelineConfig {
    pub fn new(v_thresh: f64, k: f64, clamp: ClampPolicy) -> Result<Self> {
        let cfg = Self { v_thresh, k, clamp };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.v_thresh.is_finite() || self.v_thresh < 0.0 {
            return Err(Error::invalid(format!(
                "v_thresh {} must be >= 0",
                self.v_thresh
            )));
        }
        if !self.k.is_finite() || self.k <= 1.0 {
            return Err(Error::invalid(format!(
                "amplification k {} must be > 1",
                self.k
            )));
        }
        Ok(())
    }
}

/// `prediction * nearness + prediction`. Not renormalized; values may exceed 1.
pub fn depth_boost(prediction: &SalMap, nearness: &SalMap) -> Result<SalMap> {
    prediction.dims().ensure_eq(nearness.dims())?;
    if let Some(d) = nearness.data().iter().find(|&&d| d > 1.0) {
        return Err(Error::invalid(format!("nearness value {d} outside [0, 1]")));
    }
    let data = prediction
        .data()
        .iter()
        .zip(nearness.data())
        .map(|(&y, &d)| (y as f64 * d as f64 + y as f64) as f32)
        .collect();
    SalMap::new(prediction.dims(), data)
}

/// Multiplies pixels inside any box by `k` and everything else by `1/k`.
pub fn bbox_amplify(prediction: &SalMap, bboxes: &[BBox], k: f64) -> Result<SalMap> {
    if !k.is_finite() || k < 1.0 {
        return Err(Error::invalid(format!("amplification k {k} must be >= 1")));
    }
    let dims = prediction.dims();
    for b in bboxes {
        b.validate(dims)?;
    }
    let mut inside = vec![false; dims.len()];
    for b in bboxes {
        for r in b.y..b.y + b.h {
            inside[r * dims.width + b.x..r * dims.width + b.x + b.w].fill(true);
        }
    }
    let data = prediction
        .data()
        .iter()
        .zip(&inside)
        .map(|(&y, &hit)| {
            if hit {
                (y as f64 * k) as f32
            } else {
                (y as f64 / k) as f32
            }
        })
        .collect();
    SalMap::new(dims, data)
}

/// Which branch of the pipeline a clip takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Ego vehicle above the speed threshold: depth only.
    Fast,
    /// Slow, but nobody is crossing: depth only.
    NotCrossing,
    /// Slow and a pedestrian is crossing: depth, then box amplification.
    Pedestrians,
}

/// Runs the speed gate and, only if it is not passed, the intent provider.
pub fn decide_route(
    clip: &ClipWindow,
    providers: &ProviderBundle,
    config: &PipelineConfig,
) -> Result<Route> {
    let last = clip.last();
    let v_ego = last.meta.v_ego.ok_or_else(|| {
        Error::invalid(format!(
            "clip {}: last frame {} has no v_ego",
            clip.clip_id(),
            last.frame_id()
        ))
    })?;
    if v_ego > config.v_thresh {
        return Ok(Route::Fast);
    }
    match providers.intent(clip)? {
        Intent::Crossing => Ok(Route::Pedestrians),
        _ => Ok(Route::NotCrossing),
    }
}

/// Boxes of class `person`, the only ones the pedestrian branch amplifies.
pub fn person_boxes(bboxes: Vec<BBox>) -> Vec<BBox> {
    bboxes
        .into_iter()
        .filter(|b| b.class_name == PERSON)
        .collect()
}

/// Composes one frame given an already decided route. `bboxes` is only
/// consulted on the pedestrian route.
pub fn compose(
    prediction: &SalMap,
    nearness: &SalMap,
    route: Route,
    bboxes: impl FnOnce() -> Result<Vec<BBox>>,
    config: &PipelineConfig,
) -> Result<SalMap> {
    let nearness = map::resize_bilinear(nearness, prediction.dims());
    let boosted = depth_boost(prediction, &nearness)?;
    let out = match route {
        Route::Fast | Route::NotCrossing => boosted,
        Route::Pedestrians => bbox_amplify(&boosted, &person_boxes(bboxes()?), config.k)?,
    };
    Ok(config.clamp.apply(&out))
}

/// The full gated pipeline on one clip; returns the map for its last frame.
pub fn run_sage_net(
    clip: &ClipWindow,
    providers: &ProviderBundle,
    config: &PipelineConfig,
) -> Result<SalMap> {
    config.validate()?;
    let prediction = providers.saliency(clip)?;
    let last = clip.last();
    let nearness = providers.nearness(last)?;
    let route = decide_route(clip, providers, config)?;
    compose(
        &prediction,
        &nearness,
        route,
        || providers.detect(last),
        config,
    )
}
