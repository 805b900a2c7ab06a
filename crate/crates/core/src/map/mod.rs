//! Dense grids shared by every stage: saliency maps, binary masks and boxes.
//!
//! Values are stored as `f32` and all reductions accumulate in `f64`.

mod format;
mod ops;
mod png;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use format::{
    decode_mask, decode_smap, encode_mask, encode_smap, load_mask, load_smap, save_mask, save_smap,
    FORMAT_VERSION, HEADER_LEN, MASK_MAGIC, SMAP_MAGIC,
};
pub use ops::{normalize_max, normalize_sum, resize_bilinear, resize_nearest_mask};
pub use png::{export_heatmap_png, heatmap_pixels};

/// Working resolution used by the synthetic corpora unless configured otherwise.
pub const DEFAULT_DIMS: GridDims = GridDims {
    height: 128,
    width: 256,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridDims {
    pub height: usize,
    pub width: usize,
}

impl GridDims {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid(format!(
                "grid dimensions must be at least 1x1, got {height}x{width}"
            )));
        }
        Ok(Self { height, width })
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn ensure_eq(self, other: GridDims) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::DimMismatch {
                expected: self,
                found: other,
            })
        }
    }
}

impl fmt::Display for GridDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

/// Non-negative saliency values on a row-major grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SalMap {
    dims: GridDims,
    data: Vec<f32>,
}

impl SalMap {
    pub fn new(dims: GridDims, data: Vec<f32>) -> Result<Self> {
        let dims = GridDims::new(dims.height, dims.width)?;
        if data.len() != dims.len() {
            return Err(Error::invalid(format!(
                "map of {dims} needs {} values, got {}",
                dims.len(),
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(format!(
                "map value {} at index {i} is not a finite non-negative number",
                data[i]
            )));
        }
        Ok(Self { dims, data })
    }

    /// Convenience constructor from nested rows.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != width) {
            return Err(Error::invalid("ragged rows"));
        }
        let data = rows
            .iter()
            .flat_map(|r| r.as_ref().iter().copied())
            .collect();
        Self::new(GridDims { height, width }, data)
    }

    pub fn zeros(dims: GridDims) -> Self {
        Self::filled(dims, 0.0)
    }

    pub fn filled(dims: GridDims, value: f32) -> Self {
        assert!(
            value.is_finite() && value >= 0.0,
            "fill value must be finite and >= 0"
        );
        assert!(!dims.is_empty(), "grid dimensions must be at least 1x1");
        Self {
            dims,
            data: vec![value; dims.len()],
        }
    }

    /// Builds a map by evaluating `f(row, col)` at every pixel.
    pub fn from_fn(dims: GridDims, mut f: impl FnMut(usize, usize) -> f32) -> Result<Self> {
        let mut data = Vec::with_capacity(dims.len());
        for r in 0..dims.height {
            for c in 0..dims.width {
                data.push(f(r, c));
            }
        }
        Self::new(dims, data)
    }

    /// Caller guarantees the invariants.
    pub(crate) fn from_raw(dims: GridDims, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), dims.len());
        debug_assert!(data.iter().all(|v| v.is_finite() && *v >= 0.0));
        Self { dims, data }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn height(&self) -> usize {
        self.dims.height
    }

    pub fn width(&self) -> usize {
        self.dims.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.dims.width + col]
    }

    pub fn max(&self) -> f32 {
        self.data.iter().copied().fold(0.0, f32::max)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    /// Row-major index of the first maximal pixel.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = i;
            }
        }
        best
    }

    /// Applies `f` pixelwise; results must satisfy the map invariants.
    pub fn map_values(&self, f: impl Fn(f32) -> f32) -> Result<Self> {
        Self::new(self.dims, self.data.iter().map(|&v| f(v)).collect())
    }
}

/// A {0,1} segmentation grid, object vs background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    dims: GridDims,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(dims: GridDims, data: Vec<u8>) -> Result<Self> {
        let dims = GridDims::new(dims.height, dims.width)?;
        if data.len() != dims.len() {
            return Err(Error::invalid(format!(
                "mask of {dims} needs {} values, got {}",
                dims.len(),
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|&v| v > 1) {
            return Err(Error::invalid(format!(
                "mask value {} at index {i} is not 0 or 1",
                data[i]
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != width) {
            return Err(Error::invalid("ragged rows"));
        }
        let data = rows
            .iter()
            .flat_map(|r| r.as_ref().iter().copied())
            .collect();
        Self::new(GridDims { height, width }, data)
    }

    pub fn zeros(dims: GridDims) -> Self {
        assert!(!dims.is_empty(), "grid dimensions must be at least 1x1");
        Self {
            dims,
            data: vec![0; dims.len()],
        }
    }

    pub fn from_fn(dims: GridDims, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        assert!(!dims.is_empty(), "grid dimensions must be at least 1x1");
        let mut data = Vec::with_capacity(dims.len());
        for r in 0..dims.height {
            for c in 0..dims.width {
                data.push(f(r, c) as u8);
            }
        }
        Self { dims, data }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.dims.width + col] == 1
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count_ones() == 0
    }

    pub fn or_assign(&mut self, other: &BinaryMask) -> Result<()> {
        self.dims.ensure_eq(other.dims)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a |= b;
        }
        Ok(())
    }

    /// The mask as a 0.0 / 1.0 saliency map.
    pub fn to_salmap(&self) -> SalMap {
        SalMap::from_raw(self.dims, self.data.iter().map(|&v| v as f32).collect())
    }

    /// Tight bounding box of the set pixels, or `None` for an empty mask.
    pub fn bounding_box(&self, class_name: &str) -> Option<BBox> {
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for r in 0..self.dims.height {
            for c in 0..self.dims.width {
                if self.get(r, c) {
                    x0 = x0.min(c);
                    y0 = y0.min(r);
                    x1 = x1.max(c);
                    y1 = y1.max(r);
                }
            }
        }
        (x0 != usize::MAX).then(|| BBox {
            x: x0,
            y: y0,
            w: x1 - x0 + 1,
            h: y1 - y0 + 1,
            class_name: class_name.to_owned(),
        })
    }
}

/// Axis-aligned box in pixel coordinates; `(x, y)` is the top-left corner.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
    pub class_name: String,
}

impl BBox {
    pub fn new(x: usize, y: usize, w: usize, h: usize, class_name: impl Into<String>) -> Self {
        Self {
            x,
            y,
            w,
            h,
            class_name: class_name.into(),
        }
    }

    pub fn validate(&self, dims: GridDims) -> Result<()> {
        if self.w == 0 || self.h == 0 {
            return Err(Error::invalid(format!("empty bbox {self:?}")));
        }
        if self.x + self.w > dims.width || self.y + self.h > dims.height {
            return Err(Error::invalid(format!(
                "bbox ({}, {}, {}x{}) exceeds grid {dims}",
                self.x, self.y, self.w, self.h
            )));
        }
        Ok(())
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        col >= self.x && col < self.x + self.w && row >= self.y && row < self.y + self.h
    }
}
