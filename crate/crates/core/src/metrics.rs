//! Saliency evaluation: distribution metrics against a gaze-bearing reference
//! (KL divergence, Pearson CC) and detection metrics against a binary object
//! mask (F-beta, MAE).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{BinaryMask, SalMap};

/// Regularizer for the KL ratio and denominator.
pub const KL_EPSILON: f64 = 1e-12;
pub const DEFAULT_BETA2: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetricName {
    #[serde(rename = "D_KL")]
    KlDiv,
    #[serde(rename = "CC")]
    Cc,
    #[serde(rename = "F1")]
    FBeta,
    #[serde(rename = "MAE")]
    Mae,
}

impl MetricName {
    pub const ALL: [MetricName; 4] = [
        MetricName::KlDiv,
        MetricName::Cc,
        MetricName::FBeta,
        MetricName::Mae,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::KlDiv => "D_KL",
            MetricName::Cc => "CC",
            MetricName::FBeta => "F1",
            MetricName::Mae => "MAE",
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            MetricName::KlDiv | MetricName::Mae => Direction::LowerBetter,
            MetricName::Cc | MetricName::FBeta => Direction::HigherBetter,
        }
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    LowerBetter,
    HigherBetter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub name: MetricName,
    pub value: f64,
    pub direction: Direction,
}

impl MetricResult {
    fn new(name: MetricName, value: f64) -> Self {
        Self {
            name,
            value,
            direction: name.direction(),
        }
    }
}

/// Pixel values as an f64 distribution summing to one.
fn distribution(map: &SalMap) -> Result<Vec<f64>> {
    let sum = map.sum();
    if sum <= 0.0 {
        return Err(Error::ZeroMass);
    }
    Ok(map.data().iter().map(|&v| v as f64 / sum).collect())
}

/// KL(gt || pred) in nats, with `gt` as the reference distribution so that
/// mass the prediction misses costs more than mass it adds.
pub fn kl_div(pred: &SalMap, gt: &SalMap) -> Result<MetricResult> {
    gt.dims().ensure_eq(pred.dims())?;
    let q = distribution(gt)?;
    let p = distribution(pred)?;
    let value: f64 = q
        .iter()
        .zip(&p)
        .map(|(&qi, &pi)| qi * (KL_EPSILON + qi / (pi + KL_EPSILON)).ln())
        .sum();
    // the epsilon terms can push an exact match a hair below zero
    Ok(MetricResult::new(MetricName::KlDiv, value.max(0.0)))
}

/// Pearson correlation with population moments.
pub fn pearson_cc(pred: &SalMap, gt: &SalMap) -> Result<MetricResult> {
    gt.dims().ensure_eq(pred.dims())?;
    let n = pred.data().len() as f64;
    let (ma, mb) = (pred.mean(), gt.mean());
    let (mut cov, mut va, mut vb) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in pred.data().iter().zip(gt.data()) {
        let (da, db) = (a as f64 - ma, b as f64 - mb);
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::ConstantMap);
    }
    let value = (cov / n) / ((va / n).sqrt() * (vb / n).sqrt());
    Ok(MetricResult::new(MetricName::Cc, value.clamp(-1.0, 1.0)))
}

/// How a continuous map is turned into a foreground mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ThresholdPolicy {
    /// Foreground iff value >= threshold.
    Fixed(f64),
    /// Threshold = multiplier * mean(map), clipped to [0, 1].
    Adaptive(f64),
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy::Adaptive(2.0)
    }
}

impl ThresholdPolicy {
    pub fn fixed(threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::invalid(format!(
                "fixed threshold {threshold} outside [0, 1]"
            )));
        }
        Ok(ThresholdPolicy::Fixed(threshold))
    }

    pub fn adaptive(multiplier: f64) -> Result<Self> {
        if !multiplier.is_finite() || multiplier <= 0.0 {
            return Err(Error::invalid(format!(
                "adaptive multiplier {multiplier} must be > 0"
            )));
        }
        Ok(ThresholdPolicy::Adaptive(multiplier))
    }

    pub fn threshold_for(&self, map: &SalMap) -> f64 {
        match *self {
            ThresholdPolicy::Fixed(t) => t,
            ThresholdPolicy::Adaptive(m) => (m * map.mean()).clamp(0.0, 1.0),
        }
    }
}

impl FromStr for ThresholdPolicy {
    type Err = Error;

    /// `fixed:0.5`, `adaptive:2` or bare `adaptive` / `fixed`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, value) = match s.split_once(':') {
            Some((k, v)) => {
                let v: f64 = v
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad threshold value in `{s}`")))?;
                (k, Some(v))
            }
            None => (s, None),
        };
        match kind {
            "fixed" => Self::fixed(value.unwrap_or(0.5)),
            "adaptive" => Self::adaptive(value.unwrap_or(2.0)),
            _ => Err(Error::invalid(format!("unknown threshold policy `{s}`"))),
        }
    }
}

impl fmt::Display for ThresholdPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdPolicy::Fixed(t) => write!(f, "fixed:{t}"),
            ThresholdPolicy::Adaptive(m) => write!(f, "adaptive:{m}"),
        }
    }
}

pub fn binarize(map: &SalMap, policy: ThresholdPolicy) -> BinaryMask {
    if map.max() <= 0.0 {
        return BinaryMask::zeros(map.dims());
    }
    let tau = policy.threshold_for(map);
    let data = map
        .data()
        .iter()
        .map(|&v| (v as f64 >= tau) as u8)
        .collect();
    BinaryMask::new(map.dims(), data).expect("binarized values are 0/1")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn count(pred: &BinaryMask, gt: &BinaryMask) -> Result<Self> {
        gt.dims().ensure_eq(pred.dims())?;
        let mut c = Confusion::default();
        for (&p, &g) in pred.data().iter().zip(gt.data()) {
            match (p, g) {
                (1, 1) => c.tp += 1,
                (1, 0) => c.fp += 1,
                (0, 1) => c.fn_ += 1,
                _ => {}
            }
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FScore {
    pub precision: f64,
    pub recall: f64,
    pub value: f64,
    pub beta2: f64,
}

impl FScore {
    /// Scores a confusion table. Empty ground truth scores 1 when the
    /// prediction is also empty and 0 otherwise.
    pub fn from_confusion(c: Confusion, beta2: f64) -> Result<Self> {
        if !beta2.is_finite() || beta2 <= 0.0 {
            return Err(Error::invalid(format!("beta^2 {beta2} must be > 0")));
        }
        let gt_empty = c.tp + c.fn_ == 0;
        let pred_empty = c.tp + c.fp == 0;
        if gt_empty && pred_empty {
            return Ok(Self {
                precision: 1.0,
                recall: 1.0,
                value: 1.0,
                beta2,
            });
        }
        let precision = if pred_empty {
            0.0
        } else {
            c.tp as f64 / (c.tp + c.fp) as f64
        };
        let recall = if gt_empty {
            0.0
        } else {
            c.tp as f64 / (c.tp + c.fn_) as f64
        };
        let denom = beta2 * precision + recall;
        let value = if denom == 0.0 {
            0.0
        } else {
            (1.0 + beta2) * precision * recall / denom
        };
        Ok(Self {
            precision,
            recall,
            value,
            beta2,
        })
    }

    pub fn result(&self) -> MetricResult {
        MetricResult::new(MetricName::FBeta, self.value)
    }
}

pub fn f_beta(pred_bin: &BinaryMask, gt_bin: &BinaryMask, beta2: f64) -> Result<FScore> {
    FScore::from_confusion(Confusion::count(pred_bin, gt_bin)?, beta2)
}

pub fn mae(pred: &SalMap, gt_bin: &BinaryMask) -> Result<MetricResult> {
    gt_bin.dims().ensure_eq(pred.dims())?;
    let total: f64 = pred
        .data()
        .iter()
        .zip(gt_bin.data())
        .map(|(&p, &g)| (p as f64 - g as f64).abs())
        .sum();
    Ok(MetricResult::new(
        MetricName::Mae,
        total / pred.data().len() as f64,
    ))
}

/// All four scores for one frame, in `MetricName::ALL` order: distribution
/// metrics against `fixation_gt`, detection metrics against `semantic_gt`.
pub fn evaluate_frame(
    pred: &SalMap,
    fixation_gt: &SalMap,
    semantic_gt: &BinaryMask,
    policy: ThresholdPolicy,
) -> Result<[MetricResult; 4]> {
    Ok([
        kl_div(pred, fixation_gt)?,
        pearson_cc(pred, fixation_gt)?,
        f_beta(&binarize(pred, policy), semantic_gt, DEFAULT_BETA2)?.result(),
        mae(pred, semantic_gt)?,
    ])
}
