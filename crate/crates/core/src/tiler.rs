//! Multi-scale patch planning and prediction stitching.
//!
//! Images are resized to a set of square scales (288, 294 and 302 by
//! default) and cut into 288×288 patches. Per-patch predictions are
//! stitched back by averaging overlaps, each scale is resampled to the
//! original resolution, and the scales are averaged.

use crate::error::{Error, Result};
use crate::preprocess::{resize_map, ResizeMode};
use crate::raster::ProbMap;

pub const DEFAULT_PATCH: usize = 288;
pub const DEFAULT_SCALES: [usize; 3] = [288, 294, 302];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TilePlan {
    pub scale: usize,
    pub patch: usize,
    pub stride: usize,
    /// `(x0, y0)` offsets, row-major.
    pub tiles: Vec<(usize, usize)>,
}

impl TilePlan {
    pub fn contains(&self, x0: usize, y0: usize) -> bool {
        self.tiles.contains(&(x0, y0))
    }

    /// Per-axis offsets.
    pub fn axis_offsets(&self) -> Vec<usize> {
        axis_offsets(self.scale, self.patch, self.stride)
    }
}

fn axis_offsets(scale: usize, patch: usize, stride: usize) -> Vec<usize> {
    let mut offsets = Vec::new();
    let mut o = 0;
    loop {
        if o + patch >= scale {
            offsets.push(scale - patch);
            return offsets;
        }
        offsets.push(o);
        o += stride;
    }
}

pub fn plan_tiles(scaled_size: usize, patch: usize, stride: usize) -> Result<TilePlan> {
    if patch == 0 || stride == 0 {
        return Err(Error::param(format!("patch ({patch}) and stride ({stride}) must be >= 1")));
    }
    if patch > scaled_size {
        return Err(Error::param(format!("patch {patch} exceeds scaled size {scaled_size}")));
    }
    if stride > patch {
        return Err(Error::param(format!("stride {stride} exceeds patch {patch}; tiles would leave gaps")));
    }
    let offsets = axis_offsets(scaled_size, patch, stride);
    let tiles = offsets
        .iter()
        .flat_map(|&y| offsets.iter().map(move |&x| (x, y)))
        .collect();
    Ok(TilePlan { scale: scaled_size, patch, stride, tiles })
}

/// Stride `scale - patch` (two offsets per axis), capped at `patch` for
/// scales beyond twice the patch; a single tile when the patch fills the scale.
pub fn default_plan(scale: usize, patch: usize) -> Result<TilePlan> {
    plan_tiles(scale, patch, scale.saturating_sub(patch).clamp(1, patch.max(1)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tile {
    pub x0: usize,
    pub y0: usize,
    pub map: ProbMap,
}

/// Cuts a scale-resolution map into the plan's patches.
pub fn slice_tiles(map: &ProbMap, plan: &TilePlan) -> Result<Vec<Tile>> {
    if map.width() != plan.scale || map.height() != plan.scale {
        return Err(Error::param(format!(
            "map is {}x{}, plan expects {s}x{s}",
            map.width(),
            map.height(),
            s = plan.scale
        )));
    }
    plan.tiles
        .iter()
        .map(|&(x0, y0)| {
            Ok(Tile { x0, y0, map: map.crop(x0, y0, plan.patch, plan.patch)? })
        })
        .collect()
}

/// Averages overlapping patches at scale resolution without resampling.
///
/// Tiles are accumulated in offset order, so the result does not depend on
/// the order of `tiles`.
pub fn stitch_at_scale(tiles: &[Tile], plan: &TilePlan) -> Result<ProbMap> {
    let mut ordered: Vec<&Tile> = tiles.iter().collect();
    ordered.sort_by_key(|t| (t.y0, t.x0));
    for pair in ordered.windows(2) {
        if (pair[0].x0, pair[0].y0) == (pair[1].x0, pair[1].y0) {
            return Err(Error::Integrity(format!(
                "duplicate tile at offset ({}, {})",
                pair[0].x0, pair[0].y0
            )));
        }
    }

    let s = plan.scale;
    let mut sums = vec![0.0f64; s * s];
    let mut counts = vec![0u32; s * s];
    for tile in ordered {
        if tile.map.width() != plan.patch || tile.map.height() != plan.patch {
            return Err(Error::param(format!(
                "tile at ({}, {}) is {}x{}, plan patch is {}",
                tile.x0,
                tile.y0,
                tile.map.width(),
                tile.map.height(),
                plan.patch
            )));
        }
        if !plan.contains(tile.x0, tile.y0) {
            return Err(Error::param(format!(
                "tile offset ({}, {}) is not part of the plan",
                tile.x0, tile.y0
            )));
        }
        for ty in 0..plan.patch {
            let row = (tile.y0 + ty) * s + tile.x0;
            let src = &tile.map.values()[ty * plan.patch..(ty + 1) * plan.patch];
            for (tx, &v) in src.iter().enumerate() {
                sums[row + tx] += v;
                counts[row + tx] += 1;
            }
        }
    }

    if let Some(i) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Integrity(format!(
            "pixel ({}, {}) is not covered by any tile",
            i % s,
            i / s
        )));
    }
    let values = sums
        .iter()
        .zip(&counts)
        .map(|(&sum, &n)| (sum / n as f64).clamp(0.0, 1.0))
        .collect();
    Ok(ProbMap::from_raw(s, s, values))
}

/// Stitches patches and resamples bilinearly to `out_w`×`out_h`.
pub fn stitch(tiles: &[Tile], plan: &TilePlan, out_w: usize, out_h: usize) -> Result<ProbMap> {
    let at_scale = stitch_at_scale(tiles, plan)?;
    resize_map(&at_scale, out_w, out_h, ResizeMode::Bilinear)
}

/// Per-pixel arithmetic mean.
///
/// Each pixel's values are summed in sorted order, which makes the result
/// bit-identical under any permutation of `maps`.
pub fn ensemble_average(maps: &[ProbMap]) -> Result<ProbMap> {
    let first = maps.first().ok_or_else(|| Error::param("ensemble needs at least one map"))?;
    let (w, h) = (first.width(), first.height());
    if let Some(m) = maps.iter().find(|m| m.width() != w || m.height() != h) {
        return Err(Error::param(format!(
            "ensemble size mismatch: {w}x{h} vs {}x{}",
            m.width(),
            m.height()
        )));
    }
    if maps.len() == 1 {
        return Ok(first.clone());
    }
    let n = maps.len() as f64;
    let mut scratch = Vec::with_capacity(maps.len());
    let values = (0..w * h)
        .map(|i| {
            scratch.clear();
            scratch.extend(maps.iter().map(|m| m.values()[i]));
            scratch.sort_by(f64::total_cmp);
            (scratch.iter().sum::<f64>() / n).clamp(0.0, 1.0)
        })
        .collect();
    Ok(ProbMap::from_raw(w, h, values))
}

/// Stitches each scale to the output resolution, then averages the scales.
pub fn fuse_scales(
    scales: &[(TilePlan, Vec<Tile>)],
    out_w: usize,
    out_h: usize,
) -> Result<ProbMap> {
    let maps = scales
        .iter()
        .map(|(plan, tiles)| stitch(tiles, plan, out_w, out_h))
        .collect::<Result<Vec<_>>>()?;
    ensemble_average(&maps)
}

/// Mirrors columns.
pub fn hflip(map: &ProbMap) -> ProbMap {
    let w = map.width();
    let values = map
        .values()
        .chunks_exact(w)
        .flat_map(|row| row.iter().rev().copied())
        .collect();
    ProbMap::from_raw(w, map.height(), values)
}
