use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spec::Placement;
use crate::map::{BinaryMask, GridDims, SalMap};

/// An isotropic Gaussian fixation blob, position in pixel-index units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fixation {
    pub x: f64,
    pub y: f64,
    pub sigma: f64,
    pub weight: f64,
}

impl Fixation {
    pub fn new(x: f64, y: f64, sigma: f64) -> Self {
        Self {
            x,
            y,
            sigma,
            weight: 1.0,
        }
    }
}

fn gaussian_field(fixations: &[Fixation], center_bias: f64, dims: GridDims) -> Vec<f64> {
    let center = Fixation {
        x: (dims.width as f64 - 1.0) / 2.0,
        y: (dims.height as f64 - 1.0) / 2.0,
        sigma: dims.width as f64 / 8.0,
        weight: center_bias,
    };
    let blobs: Vec<Fixation> = fixations
        .iter()
        .copied()
        .chain((center_bias > 0.0).then_some(center))
        .filter(|f| f.weight > 0.0)
        .collect();
    let mut out = vec![0.0f64; dims.len()];
    for r in 0..dims.height {
        for c in 0..dims.width {
            out[r * dims.width + c] = blobs
                .iter()
                .map(|f| {
                    let (dx, dy) = (c as f64 - f.x, r as f64 - f.y);
                    f.weight * (-(dx * dx + dy * dy) / (2.0 * f.sigma * f.sigma)).exp()
                })
                .sum();
        }
    }
    out
}

fn max_normalized(dims: GridDims, values: Vec<f64>) -> SalMap {
    let max = values.iter().copied().fold(0.0, f64::max);
    let data = if max > 0.0 {
        values.iter().map(|&v| (v / max) as f32).collect()
    } else {
        vec![0.0; values.len()]
    };
    SalMap::new(dims, data).expect("finite non-negative field")
}

/// Sum of Gaussian fixation blobs plus a center-bias blob (σ = width / 8),
/// max-normalized.
pub fn render_gaze(fixations: &[Fixation], center_bias: f64, dims: GridDims) -> SalMap {
    max_normalized(dims, gaussian_field(fixations, center_bias, dims))
}

/// Simulated raw prediction of a gaze-trained model: a blurred copy of the
/// gaze field, a weak response on objects, and seeded noise.
pub(crate) fn render_prediction(
    fixations: &[Fixation],
    center_bias: f64,
    objects: &BinaryMask,
    object_response: f64,
    noise: f64,
    rng: &mut ChaCha8Rng,
    dims: GridDims,
) -> SalMap {
    let mut field = gaussian_field(fixations, center_bias, dims);
    let peak = field.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        field.iter_mut().for_each(|v| *v /= peak);
    }
    for (v, &m) in field.iter_mut().zip(objects.data()) {
        *v += object_response * m as f64 + noise * rng.random::<f64>();
    }
    max_normalized(dims, field)
}

pub fn rasterize(placement: &Placement, dims: GridDims) -> BinaryMask {
    BinaryMask::from_fn(dims, |r, c| placement.covers(r, c))
}

pub(crate) fn footprint_visible(placement: &Placement, dims: GridDims) -> bool {
    let r0 = (placement.cy - placement.half_height).floor().max(0.0) as usize;
    let r1 = ((placement.cy + placement.half_height).ceil().max(0.0) as usize).min(dims.height - 1);
    let c0 = (placement.cx - placement.half_width).floor().max(0.0) as usize;
    let c1 = ((placement.cx + placement.half_width).ceil().max(0.0) as usize).min(dims.width - 1);
    (r0..=r1).any(|r| (c0..=c1).any(|c| placement.covers(r, c)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d1_049b_b133_11eb);
    z ^ (z >> 31)
}

/// Independent stream for `(seed, frame, index)`, so any frame can be
/// regenerated without replaying the others.
pub fn stream(seed: u64, frame: u64, index: u64) -> ChaCha8Rng {
    let key = splitmix64(splitmix64(splitmix64(seed) ^ frame) ^ index);
    ChaCha8Rng::seed_from_u64(key)
}
