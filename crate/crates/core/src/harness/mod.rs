//! Corpus-level evaluation: per-clip scoring under each ground-truth regime
//! and prediction pipeline, scenario filtering, aggregation and reports.

mod manifest;
mod report;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use manifest::{
    ClipEntry, CorpusManifest, FrameEntry, MANIFEST_FILE, MANIFEST_FORMAT, MANIFEST_VERSION,
};
pub use report::{
    aggregate, emit_report, render_report, CellStats, ReportFormat, ReportTable, Stat,
};

use crate::error::{Error, ErrorClass, Result};
use crate::fusion::{self, FrameRef, PipelineConfig, ProviderBundle, Route};
use crate::groundtruth;
use crate::map::{self, BinaryMask, GridDims, SalMap};
use crate::metrics::{self, MetricName, ThresholdPolicy};

/// Which ground truth the distribution metrics are scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    GazeOnly,
    Sage,
}

/// Whether predictions are scored as-is or after the gated composition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    Raw,
    SageNet,
}

impl Regime {
    pub const ALL: [Regime; 2] = [Regime::GazeOnly, Regime::Sage];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::GazeOnly => "gaze_only",
            Regime::Sage => "sage",
        }
    }
}

impl Pipeline {
    pub const ALL: [Pipeline; 2] = [Pipeline::Raw, Pipeline::SageNet];

    pub fn as_str(self) -> &'static str {
        match self {
            Pipeline::Raw => "raw",
            Pipeline::SageNet => "sage_net",
        }
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaze" | "gaze_only" | "gaze-only" => Ok(Regime::GazeOnly),
            "sage" => Ok(Regime::Sage),
            other => Err(Error::invalid(format!("unknown regime `{other}`"))),
        }
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Pipeline::Raw),
            "sage_net" | "sage-net" => Ok(Pipeline::SageNet),
            other => Err(Error::invalid(format!("unknown pipeline `{other}`"))),
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Clip-level scores, the mean of per-frame scores over the clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub clip_id: String,
    pub regime: Regime,
    pub pipeline: Pipeline,
    pub scenario_tags: BTreeSet<String>,
    /// Indexed like [`MetricName::ALL`].
    pub values: [f64; 4],
}

impl MetricRow {
    pub fn value(&self, name: MetricName) -> f64 {
        let idx = MetricName::ALL
            .iter()
            .position(|&n| n == name)
            .expect("known metric");
        self.values[idx]
    }
}

/// Anything carrying scenario tags can be filtered by scenario.
pub trait ScenarioTagged {
    fn scenario_tags(&self) -> &BTreeSet<String>;
}

impl ScenarioTagged for MetricRow {
    fn scenario_tags(&self) -> &BTreeSet<String> {
        &self.scenario_tags
    }
}

impl ScenarioTagged for ClipEntry {
    fn scenario_tags(&self) -> &BTreeSet<String> {
        &self.scenario_tags
    }
}

/// Keeps the items whose tags contain `tag`; warns when nothing matches.
pub fn filter_scenario<T: ScenarioTagged + Clone>(items: &[T], tag: &str) -> Vec<T> {
    let kept: Vec<T> = items
        .iter()
        .filter(|i| i.scenario_tags().contains(tag))
        .cloned()
        .collect();
    if kept.is_empty() {
        log::warn!("scenario `{tag}` matched nothing");
    }
    kept
}

impl CorpusManifest {
    pub fn filter_scenario(&self, tag: &str) -> CorpusManifest {
        CorpusManifest {
            clips: filter_scenario(&self.clips, tag),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub config: PipelineConfig,
    pub policy: ThresholdPolicy,
    pub regimes: Vec<Regime>,
    pub pipelines: Vec<Pipeline>,
    /// Worker threads; 0 lets the pool decide.
    pub workers: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            config: PipelineConfig::default(),
            policy: ThresholdPolicy::default(),
            regimes: Regime::ALL.to_vec(),
            pipelines: Pipeline::ALL.to_vec(),
            workers: 1,
        }
    }
}

/// A clip that could not be scored.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipFailure {
    pub clip_id: String,
    pub class: ErrorClass,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusEvaluation {
    pub rows: Vec<MetricRow>,
    pub failures: Vec<ClipFailure>,
}

/// Per-frame inputs at the corpus grid.
struct FrameInputs {
    gaze: SalMap,
    mask: BinaryMask,
    prediction: SalMap,
    prediction_sage: Option<SalMap>,
    sage: Option<SalMap>,
}

fn load_map_at(path: &std::path::Path, dims: GridDims) -> Result<SalMap> {
    Ok(map::resize_bilinear(&map::load_smap(path)?, dims))
}

fn load_frame(frame: &FrameRef, dims: GridDims, regimes: &[Regime]) -> Result<FrameInputs> {
    let p = &frame.paths;
    let mask = map::resize_nearest_mask(&map::load_mask(&p.mask)?, dims);
    let sage_needed = regimes.contains(&Regime::Sage);
    Ok(FrameInputs {
        gaze: load_map_at(&p.gaze, dims)?,
        mask,
        prediction: map::normalize_max(&load_map_at(&p.prediction, dims)?),
        prediction_sage: match (&p.prediction_sage, sage_needed) {
            (Some(path), true) => Some(map::normalize_max(&load_map_at(path, dims)?)),
            _ => None,
        },
        sage: match (&p.sage, sage_needed) {
            (Some(path), true) => Some(load_map_at(path, dims)?),
            _ => None,
        },
    })
}

fn fixation_truth(regime: Regime, inputs: &FrameInputs) -> Result<SalMap> {
    match regime {
        Regime::GazeOnly => Ok(inputs.gaze.clone()),
        Regime::Sage => match &inputs.sage {
            Some(s) => Ok(s.clone()),
            None => groundtruth::superimpose(&map::normalize_max(&inputs.gaze), &inputs.mask),
        },
    }
}

/// Scores one clip. Rows come out in `regimes` x `pipelines` order.
pub fn evaluate_clip(
    manifest: &CorpusManifest,
    clip: &ClipEntry,
    providers: &ProviderBundle,
    opts: &EvalOptions,
) -> Result<Vec<MetricRow>> {
    let run = || -> Result<Vec<MetricRow>> {
        let dims = manifest.dims;
        let window = manifest.load_clip(clip)?;
        let route = if opts.pipelines.contains(&Pipeline::SageNet) {
            Some(fusion::decide_route(&window, providers, &opts.config)?)
        } else {
            None
        };

        let combos: Vec<(Regime, Pipeline)> = opts
            .regimes
            .iter()
            .flat_map(|&r| opts.pipelines.iter().map(move |&p| (r, p)))
            .collect();
        let mut sums = vec![[0.0f64; 4]; combos.len()];

        for frame in window.frames() {
            let inputs = load_frame(frame, dims, &opts.regimes)?;
            let nearness = match route {
                Some(_) => Some(map::resize_bilinear(&providers.nearness(frame)?, dims)),
                None => None,
            };
            for (slot, &(regime, pipeline)) in combos.iter().enumerate() {
                let raw = match regime {
                    Regime::Sage => inputs
                        .prediction_sage
                        .as_ref()
                        .unwrap_or(&inputs.prediction),
                    Regime::GazeOnly => &inputs.prediction,
                };
                let pred = match pipeline {
                    Pipeline::Raw => raw.clone(),
                    Pipeline::SageNet => fusion::compose(
                        raw,
                        nearness.as_ref().expect("loaded when sage_net requested"),
                        route.unwrap_or(Route::Fast),
                        || providers.detect(frame),
                        &opts.config,
                    )?,
                };
                let truth = fixation_truth(regime, &inputs)?;
                let scores = metrics::evaluate_frame(&pred, &truth, &inputs.mask, opts.policy)?;
                for (acc, s) in sums[slot].iter_mut().zip(&scores) {
                    *acc += s.value;
                }
            }
        }

        let n = window.frames().len() as f64;
        let tags = clip.scenario_tags.clone();
        Ok(combos
            .iter()
            .zip(sums)
            .map(|(&(regime, pipeline), s)| MetricRow {
                clip_id: clip.clip_id.clone(),
                regime,
                pipeline,
                scenario_tags: tags.clone(),
                values: s.map(|v| v / n),
            })
            .collect())
    };
    run().map_err(|e| match e {
        e @ Error::Clip { .. } => e,
        e => e.in_clip(&clip.clip_id),
    })
}

/// Scores every clip of the manifest on a pool of `opts.workers` threads.
/// Failing clips are reported and skipped; row order follows the manifest
/// whatever the worker count.
pub fn evaluate_corpus(
    manifest: &CorpusManifest,
    providers: &ProviderBundle,
    opts: &EvalOptions,
) -> Result<CorpusEvaluation> {
    opts.config.validate()?;
    if opts.regimes.is_empty() || opts.pipelines.is_empty() {
        return Err(Error::invalid(
            "at least one regime and one pipeline are required",
        ));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
    let per_clip: Vec<Result<Vec<MetricRow>>> = pool.install(|| {
        manifest
            .clips
            .par_iter()
            .map(|clip| evaluate_clip(manifest, clip, providers, opts))
            .collect()
    });

    let mut out = CorpusEvaluation::default();
    for (clip, result) in manifest.clips.iter().zip(per_clip) {
        match result {
            Ok(rows) => out.rows.extend(rows),
            Err(e) => {
                log::warn!("skipping clip {}: {e}", clip.clip_id);
                out.failures.push(ClipFailure {
                    clip_id: clip.clip_id.clone(),
                    class: e.class(),
                    message: e.to_string(),
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(clip: &str, tags: &[&str]) -> MetricRow {
        MetricRow {
            clip_id: clip.to_owned(),
            regime: Regime::Sage,
            pipeline: Pipeline::Raw,
            scenario_tags: tags.iter().map(|s| s.to_string()).collect(),
            values: [0.0; 4],
        }
    }

    #[test]
    fn scenario_filter_is_a_set_filter() {
        let rows = vec![
            row("a", &["crossing"]),
            row("b", &["approaching"]),
            row("c", &["crossing", "intersection"]),
        ];
        let kept = filter_scenario(&rows, "crossing");
        assert_eq!(
            kept.iter().map(|r| r.clip_id.as_str()).collect::<Vec<_>>(),
            ["a", "c"]
        );
        assert!(filter_scenario(&rows, "tunnel").is_empty());
    }

    #[test]
    fn names_parse() {
        assert_eq!("gaze".parse::<Regime>().unwrap(), Regime::GazeOnly);
        assert_eq!("sage_net".parse::<Pipeline>().unwrap(), Pipeline::SageNet);
        assert!("both".parse::<Regime>().is_err());
    }
}
