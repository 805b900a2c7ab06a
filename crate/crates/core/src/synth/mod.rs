//! Deterministic synthetic driving corpora.
//!
//! A [`SceneSpec`] scripts objects, gaze, ego speed and crossing events; the
//! generator rasterizes every frame into the same artifacts a real dataset
//! export produces (gaze, semantic mask, nearness, simulated prediction and
//! the `meta.json` sidecar) and groups frames into 16-frame clips.

mod render;
mod spec;

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;

pub use render::{rasterize, render_gaze, stream, Fixation};
pub use spec::{
    CrossingEvent, FrameRange, GazeTrack, Placement, PredictionModel, SceneObject, SceneSpec,
    Shape, SpeedProfile, SpeedSegment, TagRange,
};

use crate::error::{Error, Result};
use crate::fusion::{FrameMeta, Intent, CLIP_LEN, PERSON};
use crate::groundtruth::CategoryFilter;
use crate::harness::{ClipEntry, CorpusManifest, FrameEntry, MANIFEST_FILE};
use crate::map::{self, BinaryMask, SalMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Seed(pub u64);

/// Stream index reserved for prediction noise; gaze tracks use their own index.
const PREDICTION_STREAM: u64 = 1 << 32;

/// Everything rendered for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameArtifacts {
    pub gaze: SalMap,
    pub mask: BinaryMask,
    pub nearness: SalMap,
    pub prediction: SalMap,
    pub meta: FrameMeta,
}

fn fixations(spec: &SceneSpec, seed: Seed, frame: u64) -> Vec<Fixation> {
    let dims = spec.dims();
    let mut out = Vec::new();
    for (i, track) in spec.gaze.iter().enumerate() {
        if !track.frames.is_none_or(|[a, b]| (a..=b).contains(&frame)) {
            continue;
        }
        let t = frame.saturating_sub(track.frames.map_or(0, |r| r[0])) as f64;
        let (mut x, mut y) = match (track.at, track.follow) {
            (Some([x, y]), _) => (x + track.velocity[0] * t, y + track.velocity[1] * t),
            (None, Some(idx)) => {
                let obj = &spec.objects[idx];
                if !obj.active(frame) {
                    continue;
                }
                let p = obj.placement(frame);
                (p.cx, p.cy)
            }
            (None, None) => unreachable!("validated"),
        };
        if track.jitter > 0.0 {
            let mut rng = stream(seed.0, frame, i as u64);
            x += track.jitter * (2.0 * rng.random::<f64>() - 1.0);
            y += track.jitter * (2.0 * rng.random::<f64>() - 1.0);
        }
        out.push(Fixation {
            x: x.clamp(0.0, (dims.width - 1) as f64),
            y: y.clamp(0.0, (dims.height - 1) as f64),
            sigma: track.sigma,
            weight: track.weight,
        });
    }
    out
}

/// Renders one frame. Pure in `(spec, seed, frame)`.
pub fn render_frame(spec: &SceneSpec, seed: Seed, frame: u64) -> FrameArtifacts {
    let dims = spec.dims();
    let keep = CategoryFilter::default();
    let mut mask = BinaryMask::zeros(dims);
    let mut nearness = vec![0.0f32; dims.len()];
    let mut bboxes = Vec::new();

    for obj in spec.objects.iter().filter(|o| o.active(frame)) {
        let placement = obj.placement(frame);
        let footprint = rasterize(&placement, dims);
        for (n, &hit) in nearness.iter_mut().zip(footprint.data()) {
            if hit == 1 {
                *n = n.max(placement.nearness as f32);
            }
        }
        if keep.keeps(&obj.class_name) {
            mask.or_assign(&footprint).expect("same dims");
        }
        if obj.class_name == PERSON {
            bboxes.extend(footprint.bounding_box(PERSON));
        }
    }

    let fix = fixations(spec, seed, frame);
    let gaze = render_gaze(&fix, spec.center_bias, dims);
    let model = &spec.prediction;
    let blurred: Vec<Fixation> = fix
        .iter()
        .map(|f| Fixation {
            sigma: f.sigma * model.sigma_scale,
            ..*f
        })
        .collect();
    let prediction = render::render_prediction(
        &blurred,
        spec.center_bias,
        &mask,
        model.object_response,
        model.noise,
        &mut stream(seed.0, frame, PREDICTION_STREAM),
        dims,
    );

    let meta = FrameMeta {
        frame_id: frame,
        v_ego: Some(spec.speed_at(frame)),
        intent: if spec.crossing_at(frame) {
            Intent::Crossing
        } else {
            Intent::NotCrossing
        },
        bboxes,
        scenario_tags: spec.tags_at(frame).map(str::to_owned).collect(),
    };

    FrameArtifacts {
        gaze,
        mask,
        nearness: SalMap::new(dims, nearness).expect("nearness in [0, 1]"),
        prediction,
        meta,
    }
}

fn frame_dir(frame: u64) -> PathBuf {
    PathBuf::from("frames").join(format!("{frame:06}"))
}

fn write_frame(out_dir: &Path, frame: u64, art: &FrameArtifacts) -> Result<FrameEntry> {
    let rel = frame_dir(frame);
    let dir = out_dir.join(&rel);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let entry = FrameEntry::conventional(frame, &rel);
    map::save_smap(&art.gaze, out_dir.join(&entry.gaze))?;
    map::save_mask(&art.mask, out_dir.join(&entry.mask))?;
    map::save_smap(&art.nearness, out_dir.join(&entry.nearness))?;
    map::save_smap(&art.prediction, out_dir.join(&entry.prediction))?;
    let meta_path = out_dir.join(&entry.meta);
    let mut json = serde_json::to_string_pretty(&art.meta).expect("meta serializes");
    json.push('\n');
    fs::write(&meta_path, json).map_err(|e| Error::io(&meta_path, e))?;
    Ok(entry)
}

/// Renders and writes every frame of `spec` under `out_dir`, then writes
/// `manifest.json`. Output bytes depend only on `(spec, seed)`.
pub fn generate_corpus(
    spec: &SceneSpec,
    seed: Seed,
    out_dir: impl AsRef<Path>,
) -> Result<CorpusManifest> {
    let out_dir = out_dir.as_ref();
    spec.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let entries: Vec<(FrameEntry, FrameMeta)> = (0..spec.n_frames)
        .into_par_iter()
        .map(|f| {
            let art = render_frame(spec, seed, f);
            write_frame(out_dir, f, &art).map(|e| (e, art.meta))
        })
        .collect::<Result<_>>()?;

    let clips = entries
        .chunks(CLIP_LEN)
        .enumerate()
        .map(|(i, chunk)| ClipEntry {
            clip_id: format!("{}-{i:03}", spec.name),
            scenario_tags: chunk
                .iter()
                .flat_map(|(_, m)| m.scenario_tags.iter().cloned())
                .collect(),
            frames: chunk.iter().map(|(e, _)| e.clone()).collect(),
        })
        .collect();

    let manifest = CorpusManifest::new(spec.dims(), clips, out_dir);
    manifest.save(out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Generates several scenes into `<out_dir>/<spec.name>/` and writes a merged
/// manifest at `<out_dir>/manifest.json`.
pub fn generate_suite(
    specs: &[SceneSpec],
    seed: Seed,
    out_dir: impl AsRef<Path>,
) -> Result<CorpusManifest> {
    let out_dir = out_dir.as_ref();
    let mut parts = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        let sub = PathBuf::from(&spec.name);
        let part_seed = Seed(seed.0 ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let m = generate_corpus(spec, part_seed, out_dir.join(&sub))?;
        parts.push((sub, m));
    }
    let merged = CorpusManifest::merge(out_dir, &parts)?;
    merged.save(out_dir.join(MANIFEST_FILE))?;
    Ok(merged)
}

/// Built-in scenes mirroring the evaluation scenarios.
pub mod canned {
    use super::SceneSpec;

    pub const CROSSING: &str = include_str!("../../scenes/crossing.toml");
    pub const APPROACHING: &str = include_str!("../../scenes/approaching.toml");
    pub const EMPTY_ROAD: &str = include_str!("../../scenes/empty_road.toml");

    /// Pedestrians crossing in front of a slow ego vehicle.
    pub fn crossing() -> SceneSpec {
        SceneSpec::from_toml(CROSSING).expect("canned scene is valid")
    }

    /// Cars converging in the opposite lane at highway speed.
    pub fn approaching() -> SceneSpec {
        SceneSpec::from_toml(APPROACHING).expect("canned scene is valid")
    }

    /// No objects; center-biased gaze only.
    pub fn empty_road() -> SceneSpec {
        SceneSpec::from_toml(EMPTY_ROAD).expect("canned scene is valid")
    }

    pub fn by_name(name: &str) -> Option<SceneSpec> {
        match name {
            "crossing" => Some(crossing()),
            "approaching" => Some(approaching()),
            "empty-road" | "empty_road" => Some(empty_road()),
            _ => None,
        }
    }

    pub fn all() -> Vec<SceneSpec> {
        vec![crossing(), approaching(), empty_road()]
    }
}
