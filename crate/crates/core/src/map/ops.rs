use super::{BinaryMask, GridDims, SalMap};
use crate::error::{Error, Result};

/// Scales the map so its maximum is 1. An all-zero map is returned unchanged.
pub fn normalize_max(map: &SalMap) -> SalMap {
    let max = map.max();
    if max <= 0.0 || max == 1.0 {
        return map.clone();
    }
    let max = max as f64;
    let data = map
        .data()
        .iter()
        .map(|&v| (v as f64 / max) as f32)
        .collect();
    SalMap::from_raw(map.dims(), data)
}

/// Scales the map into a distribution summing to one.
pub fn normalize_sum(map: &SalMap) -> Result<SalMap> {
    let sum = map.sum();
    if sum <= 0.0 {
        return Err(Error::ZeroMass);
    }
    let data = map
        .data()
        .iter()
        .map(|&v| (v as f64 / sum) as f32)
        .collect();
    Ok(SalMap::from_raw(map.dims(), data))
}

/// Source coordinate and blend weight for an align-corners resize axis.
fn axis_samples(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    (0..dst)
        .map(|i| {
            if src == 1 || dst == 1 {
                return (0, 0, 0.0);
            }
            let pos = i as f64 * (src - 1) as f64 / (dst - 1) as f64;
            let lo = (pos.floor() as usize).min(src - 1);
            let hi = (lo + 1).min(src - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect()
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    // exact when a == b, so constants survive
    a + (b - a) * t
}

/// Bilinear resampling with align-corners endpoint mapping: the first and last
/// rows/columns of source and target coincide.
pub fn resize_bilinear(map: &SalMap, target: GridDims) -> SalMap {
    if map.dims() == target {
        return map.clone();
    }
    let src = map.dims();
    let rows = axis_samples(src.height, target.height);
    let cols = axis_samples(src.width, target.width);
    let mut data = Vec::with_capacity(target.len());
    for &(r0, r1, ty) in &rows {
        for &(c0, c1, tx) in &cols {
            let top = lerp(map.get(r0, c0) as f64, map.get(r0, c1) as f64, tx);
            let bottom = lerp(map.get(r1, c0) as f64, map.get(r1, c1) as f64, tx);
            data.push(lerp(top, bottom, ty).max(0.0) as f32);
        }
    }
    SalMap::from_raw(target, data)
}

/// Nearest-neighbour resampling for masks, using the same align-corners mapping.
pub fn resize_nearest_mask(mask: &BinaryMask, target: GridDims) -> BinaryMask {
    if mask.dims() == target {
        return mask.clone();
    }
    let src = mask.dims();
    let pick = |(lo, hi, t): (usize, usize, f64)| if t >= 0.5 { hi } else { lo };
    let rows: Vec<usize> = axis_samples(src.height, target.height)
        .into_iter()
        .map(pick)
        .collect();
    let cols: Vec<usize> = axis_samples(src.width, target.width)
        .into_iter()
        .map(pick)
        .collect();
    BinaryMask::from_fn(target, |r, c| mask.get(rows[r], cols[c]))
}
