//! Preprocessing used by the equirectangular-input model variants.

use super::image::{EquirectImage, Image};
use crate::error::{Error, Result};

/// Splits `len` into `parts` contiguous spans: the first `len % parts` spans
/// take the ceiling, the rest the floor.
pub fn tile_bounds(len: usize, parts: usize) -> Vec<(usize, usize)> {
    let base = len / parts;
    let extra = len % parts;
    let mut start = 0;
    (0..parts)
        .map(|i| {
            let size = base + usize::from(i < extra);
            let span = (start, size);
            start += size;
            span
        })
        .collect()
}

/// The 2 x 3 grid of non-overlapping tiles in row-major order, at native size.
pub fn split_tiles(eq: &EquirectImage) -> Result<Vec<Image>> {
    if eq.width() < 3 || eq.height() < 2 {
        return Err(Error::domain("direct_split", format!("{}x{} too small for 2x3 tiles", eq.width(), eq.height())));
    }
    let cols = tile_bounds(eq.width(), 3);
    let rows = tile_bounds(eq.height(), 2);
    let mut tiles = Vec::with_capacity(6);
    for &(y, h) in &rows {
        for &(x, w) in &cols {
            tiles.push(eq.crop(x, y, w, h)?);
        }
    }
    Ok(tiles)
}

/// 2 x 3 tiles, each resized to `size x size`.
pub fn direct_split(eq: &EquirectImage, size: usize) -> Result<Vec<Image>> {
    if size == 0 {
        return Err(Error::domain("direct_split", "target size must be positive"));
    }
    split_tiles(eq)?.iter().map(|t| t.resize(size, size)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CropMode {
    /// Shorter side to `target`, then a centered `target x target` crop.
    CentralCrop,
    /// Anisotropic resize to `target x target`.
    Resize,
    /// Shorter side to `target`, aspect ratio kept.
    ShorterSide,
}

pub fn crop_and_resize(img: &Image, mode: CropMode, target: usize) -> Result<Image> {
    if target == 0 {
        return Err(Error::domain("crop_and_resize", "target must be positive"));
    }
    let shorter = |img: &Image| {
        let (w, h) = (img.width(), img.height());
        if w >= h {
            img.resize((w * target + h / 2) / h, target)
        } else {
            img.resize(target, (h * target + w / 2) / w)
        }
    };
    match mode {
        CropMode::Resize => img.resize(target, target),
        CropMode::ShorterSide => shorter(img),
        CropMode::CentralCrop => {
            let scaled = shorter(img)?;
            let x = (scaled.width() - target) / 2;
            let y = (scaled.height() - target) / 2;
            scaled.crop(x, y, target, target)
        }
    }
}
