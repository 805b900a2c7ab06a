//! Semantics-augmented gaze saliency: ground-truth construction, depth- and
//! intent-aware composition of predictions, and the evaluation metrics used
//! to compare gaze-only and semantics-augmented maps.

pub mod error;
pub mod fusion;
pub mod groundtruth;
pub mod harness;
pub mod map;
pub mod metrics;
pub mod synth;

pub use error::{Error, ErrorClass, Result};
pub use fusion::{ClampPolicy, ClipWindow, FrameMeta, Intent, PipelineConfig, ProviderBundle};
pub use groundtruth::{CategoryFilter, InstanceDetection};
pub use map::{BBox, BinaryMask, GridDims, SalMap};
pub use metrics::{MetricName, MetricResult, ThresholdPolicy};
