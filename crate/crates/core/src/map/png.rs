use std::path::Path;

use image::{GrayImage, ImageFormat};

use super::SalMap;
use crate::error::{Error, Result};

/// 8-bit intensities `round(255 * v / max)`; an all-zero map is all black.
pub fn heatmap_pixels(map: &SalMap) -> Vec<u8> {
    let max = map.max() as f64;
    if max <= 0.0 {
        return vec![0; map.data().len()];
    }
    map.data()
        .iter()
        .map(|&v| (255.0 * v as f64 / max).round().clamp(0.0, 255.0) as u8)
        .collect()
}

/// Writes the map as a lossless 8-bit grayscale PNG.
pub fn export_heatmap_png(map: &SalMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let img = GrayImage::from_raw(map.width() as u32, map.height() as u32, heatmap_pixels(map))
        .expect("buffer length matches dims");
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::io(path, std::io::Error::other(other)),
        })
}
